#include "geopoi/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "geopoi/geo.hpp"

namespace geopoi {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("error writing '{}'", path.string()));
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error(fmt::format("not a number: '{}'", text));
  return v;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < std::min<std::size_t>(ids.size(), 10); ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 10) out += fmt::format(", ... ({} total)", ids.size());
  return out;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  return fields;
}

}  // namespace

EvalReport summarize(std::span<const SamplePrediction> predictions) {
  EvalReport r;
  r.samples = predictions.size();
  std::vector<double> errors;
  for (const auto& p : predictions) {
    if (p.hit()) {
      ++r.hits;
    } else {
      errors.push_back(p.error_km);
    }
    if (p.target_absent) {
      ++r.target_absent_samples;
      if (p.hit()) ++r.target_absent_hits;
    }
  }
  if (r.samples > 0) {
    r.acc_at_1 = static_cast<double>(r.hits) / static_cast<double>(r.samples);
    r.target_absent_hit_rate = static_cast<double>(r.target_absent_hits) / static_cast<double>(r.samples);
  }
  if (r.target_absent_samples > 0)
    r.target_absent_acc = static_cast<double>(r.target_absent_hits) / static_cast<double>(r.target_absent_samples);
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    const auto m = errors.size();
    r.mean_error_km = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(m);
    r.median_error_km = m % 2 == 1 ? errors[m / 2] : 0.5 * (errors[m / 2 - 1] + errors[m / 2]);
    for (std::size_t i = 0; i < m; ++i) {
      if (i + 1 < m && errors[i + 1] == errors[i]) continue;
      r.cdf.push_back({errors[i], static_cast<double>(i + 1) / static_cast<double>(m)});
    }
  }
  return r;
}

std::vector<SamplePrediction> predict_samples(std::span<const PromptSequence> prompts,
                                              std::span<const std::string> sample_ids,
                                              std::span<const PoiInfo> poi_info, const Predictor& predict,
                                              std::size_t threads) {
  if (sample_ids.size() != prompts.size())
    throw std::invalid_argument(fmt::format("{} prompts but {} sample ids", prompts.size(), sample_ids.size()));
  for (const auto& p : prompts)
    if (!p.target || *p.target >= poi_info.size()) throw std::invalid_argument("prompt without a valid target");
  std::vector<SamplePrediction> out(prompts.size());
  auto work = [&](std::size_t shard, std::size_t stride) {
    for (std::size_t i = shard; i < prompts.size(); i += stride) {
      const auto& p = prompts[i];
      auto& o = out[i];
      o.sample_id = sample_ids[i];
      o.target = *p.target;
      o.predicted = predict(p);
      o.target_absent = p.target_absent();
      if (!o.hit()) {
        if (o.predicted >= poi_info.size())
          throw std::out_of_range(fmt::format("predicted POI index {} out of range", o.predicted));
        const auto& a = poi_info[o.predicted];
        const auto& b = poi_info[o.target];
        o.error_km = geo::haversine_km({a.lat, a.lon}, {b.lat, b.lon});
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::max<std::size_t>(1, std::min(threads, prompts.size()));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::exception_ptr> failures(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

void check_vocabulary(const Vocabulary& model, const Vocabulary& data, std::string_view what) {
  if (model.fingerprint() == data.fingerprint() && model.ids() == data.ids()) return;
  std::vector<std::string> only_model, only_data;
  for (const auto& id : model.ids())
    if (!data.contains(id)) only_model.push_back(id);
  for (const auto& id : data.ids())
    if (!model.contains(id)) only_data.push_back(id);
  if (only_model.empty() && only_data.empty()) {
    std::size_t i = 0;
    while (model.id(i) == data.id(i)) ++i;
    throw std::invalid_argument(fmt::format("{} vocabulary order differs at index {}: checkpoint '{}', data '{}'", what,
                                            i, model.id(i), data.id(i)));
  }
  throw std::invalid_argument(fmt::format("{} vocabulary mismatch; only in checkpoint: [{}]; only in data: [{}]", what,
                                          join_ids(only_model), join_ids(only_data)));
}

std::string config_fingerprint(const Recommender& model) {
  const auto& c = model.config();
  const auto& g = c.gcim;
  auto text = fmt::format("{}|D={}|K={}|blocks={}|L={}|n={}|dg={}|dk={}|M={}|gamma={}|norm={}|d={}|{:x}|{:x}|{:x}",
                          model.variant().name(), c.model_dim, c.max_events, c.blocks, g.level, g.ngram, g.gram_dim,
                          g.key_dim, g.fourier_dim, g.gamma, g.normalize_digits, model.embedding_dim(),
                          model.pois().fingerprint(), model.tokens().users().fingerprint(),
                          model.tokens().categories().fingerprint());
  return fmt::format("{:016x}", fnv1a(text));
}

EvalReport evaluate(const Recommender& model, const DatasetSplit& split, std::span<const Sample> samples,
                    std::size_t threads, std::vector<SamplePrediction>* dump) {
  check_vocabulary(model.pois(), split.pois);
  auto prompts = build_prompts(model, split, samples);
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.sample_id);
  auto predictions = predict_samples(
      prompts, ids, split.poi_info, [&](const PromptSequence& p) { return model.rank(p).front(); }, threads);
  auto report = summarize(predictions);
  report.config_fingerprint = config_fingerprint(model);
  if (dump != nullptr) *dump = std::move(predictions);
  return report;
}

EvalReport transfer_evaluate(const Recommender& source, const DatasetSplit& target,
                             const PoiEmbeddingTable& target_embeddings, const TrainConfig& config,
                             std::vector<SamplePrediction>* dump) {
  if (source.pois().ids() == target.pois.ids() && source.tokens().users().ids() == target.users.ids() &&
      source.tokens().categories().ids() == target.categories.ids())
    return evaluate(source, target, target.test, config.threads, dump);

  Recommender model(source.config(), source.variant(), TokenVocab(target.users, target.categories), target.pois,
                    target_embeddings.aligned_to(target.pois), config.seed);
  const auto from = source.parameters();
  for (auto& [name, t] : model.parameters()) {
    const bool carried = name.starts_with("gcim.") || name.starts_with("model.block") ||
                         name == "model.position_table" || name.starts_with("model.final_norm.");
    if (!carried) continue;
    const auto& src = find_tensor(from, name);
    auto dst = t;
    std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
  }
  {
    // Template and hour-of-week rows keep their meaning across cities.
    const std::size_t shared = (TokenVocab::kSpecialCount + kTimeBuckets) * source.config().model_dim;
    auto dst = model.token_table;
    std::copy_n(source.token_table.values().begin(), shared, dst.mutable_values().begin());
  }
  NamedTensors params;
  for (auto& [name, t] : model.parameters()) {
    const bool relearned = name == "model.token_table" || name.starts_with("model.head.") ||
                           (model.variant().pam ? name.starts_with("pam.") : name == "model.poi_table");
    if (relearned) params.emplace_back(name, t);
  }
  fit(model, target, params, config);
  return evaluate(model, target, target.test, config.threads, dump);
}

std::vector<CrossCityRow> cross_city(std::span<const City> cities, const ExperimentConfig& config) {
  std::vector<CrossCityRow> rows;
  std::vector<PoiEmbeddingTable> embeddings;
  SgnsConfig sgns = config.sgns;
  sgns.seed = config.train.seed;
  for (const auto& c : cities) embeddings.push_back(SkipGramSource(sgns, config.window).embeddings(c.split));
  for (std::size_t a = 0; a < cities.size(); ++a) {
    spdlog::info("cross-city: training on {}", cities[a].name);
    auto model = train(cities[a].split, embeddings[a], config.model, Variant::full(), config.train);
    for (std::size_t b = 0; b < cities.size(); ++b) {
      spdlog::info("cross-city: {} -> {}", cities[a].name, cities[b].name);
      auto report = a == b ? evaluate(model, cities[b].split, cities[b].split.test, config.train.threads)
                           : transfer_evaluate(model, cities[b].split, embeddings[b], config.train);
      rows.push_back({cities[a].name, cities[b].name, std::move(report)});
    }
  }
  return rows;
}

std::vector<AblationRow> run_ablations(const DatasetSplit& split, const ExperimentConfig& config,
                                       std::span<const std::uint64_t> seeds, std::span<const Variant> variants) {
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  static const std::vector<Variant> kAll{Variant::full(), Variant::no_gcim(), Variant::no_fourier(),
                                         Variant::no_pam()};
  if (variants.empty()) variants = kAll;
  std::vector<AblationRow> rows;
  for (const auto& v : variants) rows.push_back({v, {}, {}, 0.0});
  for (auto seed : seeds) {
    SgnsConfig sgns = config.sgns;
    sgns.seed = seed;
    const auto embeddings = SkipGramSource(sgns, config.window).embeddings(split);
    TrainConfig tc = config.train;
    tc.seed = seed;
    for (auto& row : rows) {
      spdlog::info("ablation: {} seed {}", row.variant.name(), seed);
      auto model = train(split, embeddings, config.model, row.variant, tc);
      auto report = evaluate(model, split, split.test, tc.threads);
      row.acc_per_seed.push_back(report.acc_at_1);
      row.reports.push_back(std::move(report));
    }
  }
  for (auto& row : rows)
    row.mean_acc = std::accumulate(row.acc_per_seed.begin(), row.acc_per_seed.end(), 0.0) /
                   static_cast<double>(row.acc_per_seed.size());
  return rows;
}

ReportKind parse_report_kind(std::string_view name) {
  if (name == "metrics-csv") return ReportKind::metrics_csv;
  if (name == "cdf-csv") return ReportKind::cdf_csv;
  throw std::invalid_argument(fmt::format("unknown report kind '{}' (metrics-csv, cdf-csv)", name));
}

void export_report(const EvalReport& r, const std::filesystem::path& path, ReportKind kind) {
  auto out = open_output(path);
  if (kind == ReportKind::metrics_csv) {
    out << "name,value\n";
    out << fmt::format("acc_at_1,{}\n", r.acc_at_1);
    out << fmt::format("mean_error_km,{}\n", r.mean_error_km);
    out << fmt::format("median_error_km,{}\n", r.median_error_km);
    out << fmt::format("target_absent_acc,{}\n", r.target_absent_acc);
    out << fmt::format("target_absent_hit_rate,{}\n", r.target_absent_hit_rate);
    out << fmt::format("samples,{}\n", r.samples);
    out << fmt::format("hits,{}\n", r.hits);
    out << fmt::format("target_absent_samples,{}\n", r.target_absent_samples);
    out << fmt::format("target_absent_hits,{}\n", r.target_absent_hits);
    out << fmt::format("config_fingerprint,{}\n", r.config_fingerprint);
  } else {
    out << "distance_km,cumulative_fraction\n";
    for (const auto& p : r.cdf) out << fmt::format("{},{}\n", p.distance_km, p.cumulative_fraction);
  }
  finish(out, path);
}

EvalReport parse_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  EvalReport r;
  std::string line;
  std::getline(in, line);
  if (line != "name,value") throw std::runtime_error(fmt::format("'{}' is not a metrics csv", path.string()));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(fmt::format("bad metrics row '{}'", line));
    const auto name = line.substr(0, comma);
    const auto value = line.substr(comma + 1);
    if (name == "config_fingerprint") r.config_fingerprint = value;
    else if (name == "acc_at_1") r.acc_at_1 = parse_double(value);
    else if (name == "mean_error_km") r.mean_error_km = parse_double(value);
    else if (name == "median_error_km") r.median_error_km = parse_double(value);
    else if (name == "target_absent_acc") r.target_absent_acc = parse_double(value);
    else if (name == "target_absent_hit_rate") r.target_absent_hit_rate = parse_double(value);
    else if (name == "samples") r.samples = static_cast<std::size_t>(parse_double(value));
    else if (name == "hits") r.hits = static_cast<std::size_t>(parse_double(value));
    else if (name == "target_absent_samples") r.target_absent_samples = static_cast<std::size_t>(parse_double(value));
    else if (name == "target_absent_hits") r.target_absent_hits = static_cast<std::size_t>(parse_double(value));
    else throw std::runtime_error(fmt::format("unknown metric '{}'", name));
  }
  return r;
}

std::vector<CdfPoint> parse_cdf_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  if (line != "distance_km,cumulative_fraction")
    throw std::runtime_error(fmt::format("'{}' is not a cdf csv", path.string()));
  std::vector<CdfPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv_fields(line);
    if (f.size() != 2) throw std::runtime_error(fmt::format("bad cdf row '{}'", line));
    out.push_back({parse_double(f[0]), parse_double(f[1])});
  }
  return out;
}

void write_report_json(const EvalReport& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["samples"] = r.samples;
  j["hits"] = r.hits;
  j["acc_at_1"] = r.acc_at_1;
  j["mean_error_km"] = r.mean_error_km;
  j["median_error_km"] = r.median_error_km;
  j["target_absent_samples"] = r.target_absent_samples;
  j["target_absent_hits"] = r.target_absent_hits;
  j["target_absent_acc"] = r.target_absent_acc;
  j["target_absent_hit_rate"] = r.target_absent_hit_rate;
  j["config_fingerprint"] = r.config_fingerprint;
  auto& cdf = j["cdf"] = nlohmann::json::array();
  for (const auto& p : r.cdf) cdf.push_back({p.distance_km, p.cumulative_fraction});
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

EvalReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  auto j = nlohmann::json::parse(in);
  EvalReport r;
  r.samples = j.at("samples");
  r.hits = j.at("hits");
  r.acc_at_1 = j.at("acc_at_1");
  r.mean_error_km = j.at("mean_error_km");
  r.median_error_km = j.at("median_error_km");
  r.target_absent_samples = j.at("target_absent_samples");
  r.target_absent_hits = j.at("target_absent_hits");
  r.target_absent_acc = j.at("target_absent_acc");
  r.target_absent_hit_rate = j.at("target_absent_hit_rate");
  r.config_fingerprint = j.at("config_fingerprint");
  for (const auto& p : j.at("cdf")) r.cdf.push_back({p.at(0), p.at(1)});
  return r;
}

void write_predictions_csv(std::span<const SamplePrediction> predictions, const Vocabulary& pois,
                           const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "sample_id,target,predicted,hit,target_absent,error_km\n";
  for (const auto& p : predictions)
    out << fmt::format("{},{},{},{},{},{}\n", p.sample_id, pois.id(p.target), pois.id(p.predicted), p.hit() ? 1 : 0,
                       p.target_absent ? 1 : 0, p.error_km);
  finish(out, path);
}

void write_ablation_csv(std::span<const AblationRow> rows, std::span<const std::uint64_t> seeds,
                        const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "variant";
  for (auto s : seeds) out << ",seed_" << s;
  out << ",mean\n";
  for (const auto& r : rows) {
    out << r.variant.name();
    for (double a : r.acc_per_seed) out << fmt::format(",{}", a);
    out << fmt::format(",{}\n", r.mean_acc);
  }
  finish(out, path);
}

void write_cross_city_csv(std::span<const CrossCityRow> rows, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "train_city,eval_city,samples,acc_at_1,target_absent_acc,mean_error_km,median_error_km\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{}\n", r.train_city, r.eval_city, r.report.samples, r.report.acc_at_1,
                       r.report.target_absent_acc, r.report.mean_error_km, r.report.median_error_km);
  finish(out, path);
}

}  // namespace geopoi
