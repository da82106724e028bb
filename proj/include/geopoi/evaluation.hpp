#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geopoi/checkin.hpp"
#include "geopoi/prompt.hpp"
#include "geopoi/recommender.hpp"
#include "geopoi/transition.hpp"

namespace geopoi {

/// Outcome for one test sample.
struct SamplePrediction {
  std::string sample_id;
  std::size_t target = 0;
  std::size_t predicted = 0;
  bool target_absent = false;
  double error_km = 0.0;  // 0 for hits

  bool hit() const { return predicted == target; }
};

struct CdfPoint {
  double distance_km = 0.0;
  double cumulative_fraction = 0.0;
};

struct EvalReport {
  std::size_t samples = 0;
  std::size_t hits = 0;
  double acc_at_1 = 0.0;
  /// Over incorrect predictions only; zero when every prediction is a hit.
  double mean_error_km = 0.0;
  double median_error_km = 0.0;
  /// One point per distinct miss distance, ascending.
  std::vector<CdfPoint> cdf;
  std::size_t target_absent_samples = 0;
  std::size_t target_absent_hits = 0;
  /// Hits among target-absent samples / target-absent samples.
  double target_absent_acc = 0.0;
  /// Hits among target-absent samples / all samples.
  double target_absent_hit_rate = 0.0;
  std::string config_fingerprint;
};

/// Aggregates per-sample outcomes into a report.
EvalReport summarize(std::span<const SamplePrediction> predictions);

/// Top-1 POI index for a prompt.
using Predictor = std::function<std::size_t(const PromptSequence&)>;

/// Runs `predict` over prompts (sharded over `threads` workers when > 1) and
/// fills the error distances from `poi_info`. Output follows input order.
std::vector<SamplePrediction> predict_samples(std::span<const PromptSequence> prompts,
                                              std::span<const std::string> sample_ids,
                                              std::span<const PoiInfo> poi_info, const Predictor& predict,
                                              std::size_t threads = 1);

/// Throws std::invalid_argument listing ids present on one side only, or
/// the first position where the orders diverge.
void check_vocabulary(const Vocabulary& model, const Vocabulary& data, std::string_view what = "POI");

/// Stable identifier of a model's configuration, variant and vocabularies.
std::string config_fingerprint(const Recommender& model);

EvalReport evaluate(const Recommender& model, const DatasetSplit& split, std::span<const Sample> samples,
                    std::size_t threads = 1, std::vector<SamplePrediction>* dump = nullptr);

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  SgnsConfig sgns;
  int window = 1;
};

/// Re-targets a model trained elsewhere onto `target`: coordinate encoder,
/// position table, attention blocks and final norm are copied and frozen;
/// the token table, PAM (or POI table) and head are fresh and trained on the
/// target's training split. With identical vocabularies the source model is
/// evaluated directly.
EvalReport transfer_evaluate(const Recommender& source, const DatasetSplit& target,
                             const PoiEmbeddingTable& target_embeddings, const TrainConfig& config,
                             std::vector<SamplePrediction>* dump = nullptr);

struct City {
  std::string name;
  DatasetSplit split;
};

struct CrossCityRow {
  std::string train_city;
  std::string eval_city;
  EvalReport report;
};

/// One row per ordered (train, eval) pair, diagonal included.
std::vector<CrossCityRow> cross_city(std::span<const City> cities, const ExperimentConfig& config);

struct AblationRow {
  Variant variant;
  std::vector<double> acc_per_seed;
  std::vector<EvalReport> reports;
  double mean_acc = 0.0;
};

/// Trains every variant under each seed on the same data order and
/// evaluates on the test split.
std::vector<AblationRow> run_ablations(const DatasetSplit& split, const ExperimentConfig& config,
                                       std::span<const std::uint64_t> seeds,
                                       std::span<const Variant> variants = {});

enum class ReportKind { metrics_csv, cdf_csv };
ReportKind parse_report_kind(std::string_view name);

void export_report(const EvalReport& report, const std::filesystem::path& path, ReportKind kind);
/// Inverse of the metrics-csv export.
EvalReport parse_metrics_csv(const std::filesystem::path& path);
std::vector<CdfPoint> parse_cdf_csv(const std::filesystem::path& path);

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report_json(const std::filesystem::path& path);

/// `sample_id,target,predicted,hit,target_absent,error_km`.
void write_predictions_csv(std::span<const SamplePrediction> predictions, const Vocabulary& pois,
                           const std::filesystem::path& path);

/// `variant,seed_<s>...,mean`.
void write_ablation_csv(std::span<const AblationRow> rows, std::span<const std::uint64_t> seeds,
                        const std::filesystem::path& path);
/// `train_city,eval_city,samples,acc_at_1,target_absent_acc,mean_error_km,median_error_km`.
void write_cross_city_csv(std::span<const CrossCityRow> rows, const std::filesystem::path& path);

}  // namespace geopoi
