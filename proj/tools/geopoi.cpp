// geopoi: command-line entry point.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "geopoi/checkin.hpp"
#include "geopoi/config.hpp"
#include "geopoi/evaluation.hpp"
#include "geopoi/geo.hpp"
#include "geopoi/recommender.hpp"
#include "geopoi/transition.hpp"

namespace fs = std::filesystem;
using namespace geopoi;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off");
}

Settings settings_for(const Common& c) {
  Settings s;
  if (!c.config.empty()) s.read_file(c.config);
  if (c.seed) s.seed = *c.seed;
  return s;
}

ExperimentConfig experiment(const Settings& s) {
  return {s.model, s.train_config(), s.sgns_config(), s.transition_window};
}

PoiEmbeddingTable embeddings_for(const DatasetSplit& split, const Settings& s, const std::string& stem) {
  if (!stem.empty()) return FileSource(stem).embeddings(split);
  return SkipGramSource(s.sgns_config(), s.transition_window).embeddings(split);
}

void print_metrics(const EvalReport& r) {
  std::cout << fmt::format("samples\t{}\nacc_at_1\t{}\nmean_error_km\t{}\nmedian_error_km\t{}\n", r.samples, r.acc_at_1,
                           r.mean_error_km, r.median_error_km)
            << fmt::format("target_absent_samples\t{}\ntarget_absent_acc\t{}\ntarget_absent_hit_rate\t{}\n",
                           r.target_absent_samples, r.target_absent_acc, r.target_absent_hit_rate)
            << fmt::format("config_fingerprint\t{}\n", r.config_fingerprint);
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("geopoi");
  spdlog::set_default_logger(logger);

  CLI::App app{"Next-POI recommendation with geographic coordinate and POI transition injection"};
  app.require_subcommand(1);
  Common common;

  // ingest
  std::string in_path, in_format = "canonical", out_dir;
  std::optional<int> min_checkins;
  std::optional<double> gap_hours;
  auto* ingest = app.add_subcommand("ingest", "parse, filter and split a check-in file");
  ingest->add_option("--input", in_path, "check-in file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", in_format, "canonical|foursquare-raw");
  ingest->add_option("--out", out_dir, "split directory")->required();
  ingest->add_option("--min-checkins", min_checkins, "drop users/POIs below this count");
  ingest->add_option("--gap-hours", gap_hours, "session gap in hours");
  add_common(ingest, common);

  // embed-transitions
  std::string data_dir, emb_out;
  auto* embed = app.add_subcommand("embed-transitions", "train skip-gram POI transition vectors");
  embed->add_option("--data", data_dir, "split directory")->required()->check(CLI::ExistingDirectory);
  embed->add_option("--out", emb_out, "output stem (<stem>.bin/.index/.ids)")->required();
  add_common(embed, common);

  // train
  std::string ckpt_out, emb_in;
  bool no_gcim = false, no_fourier = false, no_pam = false;
  auto* train_cmd = app.add_subcommand("train", "train a recommender checkpoint");
  train_cmd->add_option("--data", data_dir, "split directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", ckpt_out, "checkpoint directory")->required();
  train_cmd->add_option("--embeddings", emb_in, "pre-trained POI embedding stem");
  train_cmd->add_flag("--no-gcim", no_gcim, "spatial slots keep a shared placeholder");
  train_cmd->add_flag("--no-fourier", no_fourier, "zero the Fourier block");
  train_cmd->add_flag("--no-pam", no_pam, "learned per-POI tokens instead of aligned vectors");
  add_common(train_cmd, common);

  // evaluate
  std::string ckpt_in, split_name = "test", report_out, predictions_out, metrics_out, cdf_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Acc@1, error distances and target-absent accuracy");
  eval_cmd->add_option("--checkpoint", ckpt_in, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", data_dir, "split directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--split", split_name, "test|val")->check(CLI::IsMember({"test", "val"}));
  eval_cmd->add_option("--out", report_out, "report JSON");
  eval_cmd->add_option("--predictions", predictions_out, "per-sample CSV dump");
  eval_cmd->add_option("--metrics", metrics_out, "metrics CSV");
  eval_cmd->add_option("--cdf", cdf_out, "error-distance CDF CSV");
  add_common(eval_cmd, common);

  // cross-city
  std::vector<std::string> city_specs;
  std::string table_out;
  auto* cross = app.add_subcommand("cross-city", "train on each city, evaluate on every city");
  cross->add_option("--city", city_specs, "NAME=SPLIT_DIR (repeatable)")->required();
  cross->add_option("--out", table_out, "CSV table")->required();
  add_common(cross, common);

  // ablate
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto* ablate = app.add_subcommand("ablate", "train and evaluate full, no_gcim, no_fourier, no_pam");
  ablate->add_option("--data", data_dir, "split directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--seeds", seeds, "seeds")->delimiter(',');
  ablate->add_option("--out", table_out, "CSV table")->required();
  add_common(ablate, common);

  // encode-gps
  double lat = 0.0, lon = 0.0;
  int level = 25;
  std::optional<int> ngram;
  auto* encode = app.add_subcommand("encode-gps", "print pixel, tile, quadkey and n-grams");
  encode->add_option("--lat", lat, "latitude")->required();
  encode->add_option("--lon", lon, "longitude")->required();
  encode->add_option("--level", level, "zoom level");
  encode->add_option("--ngrams", ngram, "n-gram width");
  add_common(encode, common);

  // report
  std::string report_in, kind = "metrics-csv", report_path;
  auto* report = app.add_subcommand("report", "render a report JSON as CSV");
  report->add_option("--input", report_in, "report JSON from evaluate")->required()->check(CLI::ExistingFile);
  report->add_option("--kind", kind, "metrics-csv|cdf-csv");
  report->add_option("--out", report_path, "CSV path")->required();
  add_common(report, common);

  CLI11_PARSE(app, argc, argv);

  try {
    logger->set_level(spdlog::level::from_str(common.log_level));
    const Settings s = settings_for(common);

    if (*ingest) {
      auto format = parse_input_format(in_format);
      auto parsed = parse_checkins(in_path, format);
      spdlog::info("parsed {} check-ins ({} skipped)", parsed.checkins.size(), parsed.skipped);
      auto kept = filter_sparse(parsed.checkins, min_checkins.value_or(s.min_checkins));
      auto split = split_chronological(build_trajectories(kept, gap_hours.value_or(s.session_gap_hours)), s.split);
      split.save(out_dir);
      std::cout << fmt::format("checkins\t{}\nskipped\t{}\nkept\t{}\nusers\t{}\npois\t{}\ntrain\t{}\nval\t{}\ntest\t{}\n",
                               parsed.checkins.size(), parsed.skipped, kept.size(), split.users.size(),
                               split.pois.size(), split.train.size(), split.val.size(), split.test.size());
    } else if (*embed) {
      auto split = DatasetSplit::load(data_dir);
      auto pairs = extract_transition_pairs(split.train_trajectories(), split.pois, s.transition_window);
      auto result = train_embeddings(pairs, split.pois, s.sgns_config());
      save_embeddings(emb_out, result.table);
      std::cout << fmt::format("pairs\t{}\nfinal_loss\t{}\n", pairs.size(), result.epoch_loss.back());
    } else if (*train_cmd) {
      auto split = DatasetSplit::load(data_dir);
      Variant variant{!no_gcim, !no_fourier, !no_pam};
      TrainResult result;
      auto model = train(split, embeddings_for(split, s, emb_in), s.model, variant, s.train_config(), &result);
      model.save(ckpt_out);
      std::cout << fmt::format("variant\t{}\nepochs\t{}\nbest_epoch\t{}\n", variant.name(), result.epoch_loss.size(),
                               result.best_epoch);
      if (!result.val_accuracy.empty())
        std::cout << fmt::format("val_acc_at_1\t{}\n", result.val_accuracy[result.best_epoch - 1]);
    } else if (*eval_cmd) {
      auto split = DatasetSplit::load(data_dir);
      auto model = Recommender::load(ckpt_in);
      std::vector<SamplePrediction> dump;
      const auto& samples = split_name == "val" ? split.val : split.test;
      auto r = evaluate(model, split, samples, s.train.threads, &dump);
      if (!report_out.empty()) write_report_json(r, report_out);
      if (!predictions_out.empty()) write_predictions_csv(dump, split.pois, predictions_out);
      if (!metrics_out.empty()) export_report(r, metrics_out, ReportKind::metrics_csv);
      if (!cdf_out.empty()) export_report(r, cdf_out, ReportKind::cdf_csv);
      print_metrics(r);
    } else if (*cross) {
      std::vector<City> cities;
      for (const auto& spec : city_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument(fmt::format("--city expects NAME=DIR, got '{}'", spec));
        cities.push_back({spec.substr(0, eq), DatasetSplit::load(spec.substr(eq + 1))});
      }
      auto rows = cross_city(cities, experiment(s));
      write_cross_city_csv(rows, table_out);
      for (const auto& r : rows) std::cout << fmt::format("{}\t{}\t{}\n", r.train_city, r.eval_city, r.report.acc_at_1);
    } else if (*ablate) {
      auto split = DatasetSplit::load(data_dir);
      auto rows = run_ablations(split, experiment(s), seeds);
      write_ablation_csv(rows, seeds, table_out);
      for (const auto& r : rows) std::cout << fmt::format("{}\t{}\n", r.variant.name(), r.mean_acc);
    } else if (*encode) {
      auto pos = geo::project(lat, lon, level);
      auto key = geo::quadkey(pos);
      auto grams = geo::ngrams(key, ngram.value_or(s.model.gcim.ngram));
      std::cout << "pixel_x\tpixel_y\ttile_x\ttile_y\tquadkey\tngrams\n";
      std::cout << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", pos.x, pos.y, pos.tile_x, pos.tile_y, key.digits,
                               fmt::join(grams, ","));
    } else if (*report) {
      export_report(read_report_json(report_in), report_path, parse_report_kind(kind));
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
