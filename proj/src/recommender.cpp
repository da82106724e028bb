#include "geopoi/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace geopoi {
namespace {

constexpr const char* kCheckpointFormat = "geopoi-checkpoint/1";

GcimConfig gcim_config(const ModelConfig& config) {
  config.validate();
  GcimConfig g = config.gcim;
  g.model_dim = config.model_dim;
  return g;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace

Variant Variant::parse(std::string_view name) {
  if (name == "full") return full();
  if (name == "no_gcim") return no_gcim();
  if (name == "no_fourier") return no_fourier();
  if (name == "no_pam") return no_pam();
  throw std::invalid_argument(fmt::format("unknown variant '{}'", name));
}

std::string Variant::name() const {
  if (*this == full()) return "full";
  if (*this == no_gcim()) return "no_gcim";
  if (*this == no_fourier()) return "no_fourier";
  if (*this == no_pam()) return "no_pam";
  std::string out;
  if (!gcim) out += "no_gcim+";
  if (!fourier) out += "no_fourier+";
  if (!pam) out += "no_pam+";
  out.pop_back();
  return out;
}

void ModelConfig::validate() const {
  if (model_dim == 0) throw std::invalid_argument("model dim must be >= 1");
  if (max_events == 0) throw std::invalid_argument("max events must be >= 1");
}

AttentionBlock AttentionBlock::init(std::size_t dim, nn::Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  AttentionBlock b;
  b.ln1_gain = nn::filled({dim}, 1.0);
  b.ln1_bias = nn::filled({dim}, 0.0);
  b.w_q = nn::normal({dim, dim}, s, rng);
  b.w_k = nn::normal({dim, dim}, s, rng);
  b.w_v = nn::normal({dim, dim}, s, rng);
  b.w_o = nn::normal({dim, dim}, s, rng);
  b.ln2_gain = nn::filled({dim}, 1.0);
  b.ln2_bias = nn::filled({dim}, 0.0);
  b.ff_in = nn::Linear::init(dim, 4 * dim, rng);
  b.ff_out = nn::Linear::init(4 * dim, dim, rng);
  return b;
}

ad::Tensor AttentionBlock::operator()(const ad::Tensor& x) const {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  auto h = ad::layer_norm(x, ln1_gain, ln1_bias);
  auto q = ad::matmul(h, w_q);
  auto k = ad::matmul(h, w_k);
  auto v = ad::matmul(h, w_v);
  auto attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d), true);
  auto y = ad::add(x, ad::matmul(ad::matmul(attn, v), w_o));
  auto f = ff_out(ad::relu(ff_in(ad::layer_norm(y, ln2_gain, ln2_bias))));
  return ad::add(y, f);
}

ad::Tensor AttentionBlock::last_row(const ad::Tensor& x) const {
  const std::size_t n = x.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  auto h = ad::layer_norm(x, ln1_gain, ln1_bias);
  auto q = ad::matmul(ad::slice(h, n - 1, n), w_q);
  auto k = ad::matmul(h, w_k);
  auto v = ad::matmul(h, w_v);
  auto attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d));
  auto y = ad::add(ad::slice(x, n - 1, n), ad::matmul(ad::matmul(attn, v), w_o));
  auto f = ff_out(ad::relu(ff_in(ad::layer_norm(y, ln2_gain, ln2_bias))));
  return ad::add(y, f);
}

void AttentionBlock::append_parameters(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + "ln1.gain", ln1_gain);
  out.emplace_back(prefix + "ln1.bias", ln1_bias);
  out.emplace_back(prefix + "w_q", w_q);
  out.emplace_back(prefix + "w_k", w_k);
  out.emplace_back(prefix + "w_v", w_v);
  out.emplace_back(prefix + "w_o", w_o);
  out.emplace_back(prefix + "ln2.gain", ln2_gain);
  out.emplace_back(prefix + "ln2.bias", ln2_bias);
  out.emplace_back(prefix + "ff_in.weight", ff_in.weight);
  out.emplace_back(prefix + "ff_in.bias", ff_in.bias);
  out.emplace_back(prefix + "ff_out.weight", ff_out.weight);
  out.emplace_back(prefix + "ff_out.bias", ff_out.bias);
}

Recommender::Recommender(ModelConfig config, Variant variant, TokenVocab tokens, Vocabulary pois,
                         const PoiEmbeddingTable& embeddings, std::uint64_t seed)
    : Recommender(std::move(config), variant, std::move(tokens), std::move(pois), embeddings, nn::Rng(seed)) {}

Recommender::Recommender(ModelConfig config, Variant variant, TokenVocab tokens, Vocabulary pois,
                         const PoiEmbeddingTable& embeddings, nn::Rng&& rng)
    : gcim(gcim_config(config), rng),
      pam(embeddings.dim, config.model_dim, rng),
      config_(std::move(config)),
      variant_(variant),
      tokens_(std::move(tokens)),
      pois_(std::move(pois)) {
  config_.gcim.model_dim = config_.model_dim;
  if (pois_.size() == 0) throw std::invalid_argument("recommender: empty POI vocabulary");
  if (embeddings.pois.fingerprint() != pois_.fingerprint())
    throw std::invalid_argument("recommender: embedding table is not aligned to the POI vocabulary");
  const std::size_t d = config_.model_dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  token_table = nn::normal({tokens_.size(), d}, s, rng);
  position_table = nn::normal({config_.max_tokens(), d}, s, rng);
  poi_table = nn::normal({pois_.size(), d}, s, rng);
  for (std::size_t i = 0; i < config_.blocks; ++i) blocks.push_back(AttentionBlock::init(d, rng));
  final_gain = nn::filled({d}, 1.0);
  final_bias = nn::filled({d}, 0.0);
  head = nn::Linear::init(d, pois_.size(), rng);
  embeddings_ = embeddings.to_tensor();
}

PromptSequence Recommender::prompt(std::span<const CheckIn> prefix, const CheckIn* target) const {
  return build_prompt(prefix, target, tokens_, pois_, config_.max_events);
}

ad::Tensor Recommender::embed_with(const PromptSequence& seq, const ad::Tensor& spatial,
                                   std::span<const std::size_t> spatial_rows, const ad::Tensor& poi_rows,
                                   std::span<const std::size_t> poi_index) const {
  const std::size_t n = seq.length();
  if (n == 0 || n > config_.max_tokens())
    throw std::invalid_argument(fmt::format("prompt of {} tokens exceeds the {}-token window", n, config_.max_tokens()));
  if (seq.spatial_slots.size() != spatial_rows.size() || seq.poi_slots.size() != poi_index.size())
    throw std::invalid_argument(
        fmt::format("prompt has {} spatial / {} POI slots but {} / {} embeddings", seq.spatial_slots.size(),
                    seq.poi_slots.size(), spatial_rows.size(), poi_index.size()));
  auto x = ad::embedding_gather(token_table, seq.tokens);
  if (variant_.gcim) x = splice(x, seq.spatial_slots, ad::embedding_gather(spatial, spatial_rows));
  x = splice(x, seq.poi_slots, ad::embedding_gather(poi_rows, poi_index));
  return ad::add(x, ad::slice(position_table, 0, n));
}

ad::Tensor Recommender::embed(const PromptSequence& seq) const {
  if (seq.slot_coords.size() != seq.spatial_slots.size() || seq.slot_pois.size() != seq.poi_slots.size())
    throw std::invalid_argument("prompt slot/content count mismatch");
  const auto spatial_rows = iota(seq.slot_coords.size());
  ad::Tensor spatial;
  if (variant_.gcim && !seq.slot_coords.empty()) spatial = gcim.encode_rows(seq.slot_coords, variant_.fourier);
  if (variant_.pam) {
    if (seq.slot_pois.empty()) return embed_with(seq, spatial, spatial_rows, poi_table, seq.slot_pois);
    auto aligned = pam.align_rows(ad::embedding_gather(embeddings_, seq.slot_pois));
    return embed_with(seq, spatial, spatial_rows, aligned, iota(seq.slot_pois.size()));
  }
  return embed_with(seq, spatial, spatial_rows, poi_table, seq.slot_pois);
}

ad::Tensor Recommender::encode(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (const auto& block : blocks) h = block(h);
  return ad::layer_norm(h, final_gain, final_bias);
}

ad::Tensor Recommender::encode_last(const ad::Tensor& x) const {
  if (blocks.empty()) return ad::layer_norm(ad::slice(x, x.rows() - 1, x.rows()), final_gain, final_bias);
  ad::Tensor h = x;
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) h = blocks[i](h);
  return ad::layer_norm(blocks.back().last_row(h), final_gain, final_bias);
}

ad::Tensor Recommender::head_logits(const ad::Tensor& hidden) const { return head(hidden); }

ad::Tensor Recommender::logits(const PromptSequence& seq) const {
  return ad::reshape(head_logits(encode_last(embed(seq))), {pois_.size()});
}

ad::Tensor Recommender::batch_logits(std::span<const PromptSequence* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("batch_logits: empty batch");
  std::map<std::pair<double, double>, std::size_t> coord_ids;
  std::vector<geo::LatLon> coords;
  std::map<std::size_t, std::size_t> poi_ids;
  std::vector<std::size_t> poi_list;
  std::vector<std::vector<std::size_t>> spatial_rows(batch.size()), poi_rows(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = *batch[b];
    if (seq.slot_coords.size() != seq.spatial_slots.size() || seq.slot_pois.size() != seq.poi_slots.size())
      throw std::invalid_argument("prompt slot/content count mismatch");
    for (const auto& c : seq.slot_coords) {
      auto [it, fresh] = coord_ids.try_emplace({c.lat, c.lon}, coords.size());
      if (fresh) coords.push_back(c);
      spatial_rows[b].push_back(it->second);
    }
    for (auto p : seq.slot_pois) {
      if (!variant_.pam) {
        poi_rows[b].push_back(p);
        continue;
      }
      auto [it, fresh] = poi_ids.try_emplace(p, poi_list.size());
      if (fresh) poi_list.push_back(p);
      poi_rows[b].push_back(it->second);
    }
  }
  ad::Tensor spatial;
  if (variant_.gcim && !coords.empty()) spatial = gcim.encode_rows(coords, variant_.fourier);
  ad::Tensor poi_source = poi_table;
  if (variant_.pam && !poi_list.empty()) poi_source = pam.align_rows(ad::embedding_gather(embeddings_, poi_list));

  std::vector<ad::Tensor> last;
  last.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    last.push_back(encode_last(embed_with(*batch[b], spatial, spatial_rows[b], poi_source, poi_rows[b])));
  }
  return head_logits(last.size() == 1 ? last.front() : ad::concat(last, 0));
}

std::vector<std::size_t> rank_scores(std::span<const double> scores) {
  auto order = iota(scores.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> Recommender::rank(const PromptSequence& seq) const { return rank_scores(logits(seq).values()); }

NamedTensors Recommender::parameters() const {
  NamedTensors out = gcim.parameters();
  for (auto& p : pam.parameters()) out.push_back(std::move(p));
  out.emplace_back("model.token_table", token_table);
  out.emplace_back("model.position_table", position_table);
  out.emplace_back("model.poi_table", poi_table);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].append_parameters(out, fmt::format("model.block{}.", i));
  out.emplace_back("model.final_norm.gain", final_gain);
  out.emplace_back("model.final_norm.bias", final_bias);
  out.emplace_back("model.head.weight", head.weight);
  out.emplace_back("model.head.bias", head.bias);
  return out;
}

NamedTensors Recommender::trainable() const {
  NamedTensors out;
  for (auto& [name, t] : parameters()) {
    if (name.starts_with("gcim.") && !variant_.gcim) continue;
    if (name == "gcim.w_s" && !variant_.fourier) continue;
    if (name.starts_with("pam.") && !variant_.pam) continue;
    if (name == "model.poi_table" && variant_.pam) continue;
    out.emplace_back(name, t);
  }
  return out;
}

void Recommender::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto& g = config_.gcim;
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["variant"] = {{"gcim", variant_.gcim}, {"fourier", variant_.fourier}, {"pam", variant_.pam}};
  manifest["config"] = {{"model_dim", config_.model_dim},
                        {"max_events", config_.max_events},
                        {"blocks", config_.blocks},
                        {"embedding_dim", embedding_dim()},
                        {"gcim",
                         {{"level", g.level},
                          {"ngram", g.ngram},
                          {"gram_dim", g.gram_dim},
                          {"key_dim", g.key_dim},
                          {"fourier_dim", g.fourier_dim},
                          {"gamma", g.gamma},
                          {"normalize_digits", g.normalize_digits}}}};
  manifest["vocab"] = {{"pois", pois_.ids()},
                       {"users", tokens_.users().ids()},
                       {"categories", tokens_.categories().ids()}};
  manifest["fingerprints"] = {{"pois", hex64(pois_.fingerprint())},
                              {"users", hex64(tokens_.users().fingerprint())},
                              {"categories", hex64(tokens_.categories().fingerprint())}};
  manifest["modules"] = {"gcim.", "pam.", "poiemb.", "model."};
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / "manifest.json").string()));
    out << manifest.dump(2) << '\n';
  }
  auto tensors = parameters();
  tensors.emplace_back("poiemb.table", embeddings_);
  save_tensors(dir / "params", tensors);
}

Recommender Recommender::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error(fmt::format("cannot open checkpoint manifest '{}'", (dir / "manifest.json").string()));
  auto manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != kCheckpointFormat)
    throw std::runtime_error(fmt::format("'{}' is not a recognised checkpoint", dir.string()));

  const auto& c = manifest.at("config");
  ModelConfig config;
  config.model_dim = c.at("model_dim");
  config.max_events = c.at("max_events");
  config.blocks = c.at("blocks");
  const auto& g = c.at("gcim");
  config.gcim.level = g.at("level");
  config.gcim.ngram = g.at("ngram");
  config.gcim.gram_dim = g.at("gram_dim");
  config.gcim.key_dim = g.at("key_dim");
  config.gcim.fourier_dim = g.at("fourier_dim");
  config.gcim.gamma = g.at("gamma");
  config.gcim.normalize_digits = g.at("normalize_digits");
  const auto& v = manifest.at("variant");
  Variant variant{v.at("gcim"), v.at("fourier"), v.at("pam")};

  const auto& vocab = manifest.at("vocab");
  Vocabulary pois(vocab.at("pois").get<std::vector<std::string>>());
  Vocabulary users(vocab.at("users").get<std::vector<std::string>>());
  Vocabulary categories(vocab.at("categories").get<std::vector<std::string>>());
  const auto& fp = manifest.at("fingerprints");
  if (fp.at("pois") != hex64(pois.fingerprint()) || fp.at("users") != hex64(users.fingerprint()) ||
      fp.at("categories") != hex64(categories.fingerprint()))
    throw std::runtime_error("checkpoint vocabulary does not match its recorded fingerprints");

  const std::size_t d = c.at("embedding_dim");
  PoiEmbeddingTable placeholder{pois, d, std::vector<double>(pois.size() * d, 0.0)};
  Recommender model(config, variant, TokenVocab(std::move(users), std::move(categories)), pois, placeholder, 0);
  auto stored = load_tensors(dir / "params");
  auto targets = model.parameters();
  targets.emplace_back("poiemb.table", model.embeddings_);
  assign_tensors(targets, stored);
  return model;
}

std::vector<PromptSequence> build_prompts(const Recommender& model, const DatasetSplit& split,
                                          std::span<const Sample> samples) {
  std::vector<PromptSequence> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(model.prompt(split.prefix(s), &split.target(s)));
  return out;
}

double accuracy(const Recommender& model, std::span<const PromptSequence> prompts, std::size_t threads) {
  if (prompts.empty()) return 0.0;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, prompts.size());
  for (const auto& p : prompts)
    if (!p.target) throw std::invalid_argument("accuracy: prompt without target");
  std::vector<std::size_t> hits(threads, 0);
  auto work = [&](std::size_t shard) {
    for (std::size_t i = shard; i < prompts.size(); i += threads) {
      const auto& p = prompts[i];
      auto scores = model.logits(p);
      if (argmax(scores.values()) == *p.target) ++hits[shard];
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  return static_cast<double>(std::accumulate(hits.begin(), hits.end(), std::size_t{0})) /
         static_cast<double>(prompts.size());
}

TrainResult fit(Recommender& model, const DatasetSplit& split, const NamedTensors& params, const TrainConfig& config) {
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");
  if (config.batch_size == 0 || config.max_epochs < 1) throw std::invalid_argument("train: invalid configuration");
  const auto train_prompts = build_prompts(model, split, split.train);
  const auto val_prompts = build_prompts(model, split, split.val);

  // Only the listed parameters collect gradients during this run.
  auto all = model.parameters();
  std::vector<bool> previous;
  for (auto& [name, t] : all) {
    previous.push_back(t.requires_grad());
    bool listed = std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.second.same_storage(t); });
    t.set_requires_grad(listed);
  }

  std::vector<ad::Tensor> tensors;
  for (const auto& [name, t] : params) tensors.push_back(t);
  Adam adam(tensors, config.adam);
  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  auto order = iota(train_prompts.size());

  TrainResult result;
  std::vector<std::vector<double>> best;
  double best_acc = -1.0;
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const PromptSequence*> batch;
      std::vector<std::size_t> targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_prompts[order[i]]);
        targets.push_back(*train_prompts[order[i]].target);
      }
      ad::Tape tape;
      auto loss = ad::cross_entropy_logits(model.batch_logits(batch), targets);
      tape.backward(loss);
      adam.step();
      total += loss.item() * static_cast<double>(end - start);
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));

    if (val_prompts.empty()) {
      result.best_epoch = epoch;
      spdlog::info("epoch {}: loss {:.4f}", epoch, result.epoch_loss.back());
      continue;
    }
    const double acc = accuracy(model, val_prompts, config.threads);
    result.val_accuracy.push_back(acc);
    spdlog::info("epoch {}: loss {:.4f}, val Acc@1 {:.4f}", epoch, result.epoch_loss.back(), acc);
    if (acc > best_acc) {
      best_acc = acc;
      result.best_epoch = epoch;
      stale = 0;
      best.clear();
      for (const auto& t : tensors) best.emplace_back(t.values().begin(), t.values().end());
    } else if (++stale >= config.patience) {
      break;
    }
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < tensors.size(); ++i) std::copy(best[i].begin(), best[i].end(), tensors[i].mutable_values().begin());
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].second.zero_grad();
    all[i].second.set_requires_grad(previous[i]);
  }
  return result;
}

Recommender train(const DatasetSplit& split, const PoiEmbeddingTable& embeddings, const ModelConfig& model_config,
                  Variant variant, const TrainConfig& config, TrainResult* result) {
  Recommender model(model_config, variant, TokenVocab(split.users, split.categories), split.pois,
                    embeddings.aligned_to(split.pois), config.seed);
  auto r = fit(model, split, model.trainable(), config);
  if (result != nullptr) *result = std::move(r);
  return model;
}

}  // namespace geopoi
