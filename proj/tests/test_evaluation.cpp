#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "geopoi/evaluation.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace geopoi;

namespace {

std::filesystem::path temp_path(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

PromptSequence prompt_for(std::size_t target, std::vector<std::size_t> history) {
  PromptSequence p;
  p.slot_pois = std::move(history);
  p.target = target;
  return p;
}

// Four POIs around Manhattan; samples 0 and 2 are hits.
struct FourSamples {
  std::vector<PoiInfo> info{{"a", 40.7580, -73.9855}, {"b", 40.7484, -73.9857}, {"c", 40.6892, -74.0445},
                            {"d", 40.7061, -73.9969}};
  std::vector<PromptSequence> prompts{prompt_for(0, {1}), prompt_for(1, {1}), prompt_for(2, {3}), prompt_for(3, {0})};
  std::vector<std::size_t> answers{0, 2, 2, 0};
  std::vector<std::string> ids{"s0", "s1", "s2", "s3"};

  std::vector<SamplePrediction> run(std::size_t threads = 1) const {
    return predict_samples(prompts, ids, info,
                           [&](const PromptSequence& p) {
                             auto it = std::find_if(prompts.begin(), prompts.end(),
                                                    [&](const PromptSequence& q) { return &q == &p; });
                             return answers[static_cast<std::size_t>(it - prompts.begin())];
                           },
                           threads);
  }
};

void expect_same_report(const EvalReport& a, const EvalReport& b, double tol) {
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_NEAR(a.acc_at_1, b.acc_at_1, tol);
  EXPECT_NEAR(a.mean_error_km, b.mean_error_km, tol);
  EXPECT_NEAR(a.median_error_km, b.median_error_km, tol);
  EXPECT_NEAR(a.target_absent_acc, b.target_absent_acc, tol);
  EXPECT_NEAR(a.target_absent_hit_rate, b.target_absent_hit_rate, tol);
  EXPECT_EQ(a.target_absent_samples, b.target_absent_samples);
  EXPECT_EQ(a.target_absent_hits, b.target_absent_hits);
  EXPECT_EQ(a.config_fingerprint, b.config_fingerprint);
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.model_dim = 8;
  m.max_events = 4;
  m.blocks = 1;
  m.gcim.level = 8;
  m.gcim.ngram = 2;
  m.gcim.gram_dim = 4;
  m.gcim.key_dim = 4;
  m.gcim.fourier_dim = 4;
  return m;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.model = tiny_model();
  c.train.max_epochs = 1;
  c.train.threads = 1;
  c.sgns.dim = 4;
  c.sgns.epochs = 1;
  return c;
}

DatasetSplit tiny_city(const std::string& prefix, geo::LatLon center, std::uint64_t seed) {
  fixtures::ClusterSpec spec;
  spec.clusters = 2;
  spec.pois_per_cluster = 4;
  spec.users = 6;
  spec.events = 12;
  spec.center = center;
  spec.id_prefix = prefix + "p";
  spec.user_prefix = prefix + "u";
  return split_chronological(build_trajectories(fixtures::geo_clustered(spec, seed)));
}

}  // namespace

TEST(Summarize, OraclePredictorIsPerfect) {
  FourSamples f;
  f.answers = {0, 1, 2, 3};
  auto r = summarize(f.run());
  EXPECT_EQ(r.acc_at_1, 1.0);
  EXPECT_TRUE(r.cdf.empty());
  EXPECT_EQ(r.mean_error_km, 0.0);
  EXPECT_EQ(r.median_error_km, 0.0);
}

TEST(Summarize, AlwaysWrongPredictorCoversEverySample) {
  FourSamples f;
  f.answers = {1, 0, 3, 2};
  auto r = summarize(f.run());
  EXPECT_EQ(r.acc_at_1, 0.0);
  ASSERT_FALSE(r.cdf.empty());
  EXPECT_EQ(r.cdf.back().cumulative_fraction, 1.0);
  // Two distinct distances, each hit twice.
  EXPECT_EQ(r.cdf.size(), 2u);
  EXPECT_EQ(r.cdf.front().cumulative_fraction, 0.5);
}

TEST(Summarize, HandBuiltFourSamples) {
  FourSamples f;
  auto preds = f.run();
  auto r = summarize(preds);
  const double d1 = fixtures::reference_distance_km(f.info[2].lat, f.info[2].lon, f.info[1].lat, f.info[1].lon);
  const double d3 = fixtures::reference_distance_km(f.info[0].lat, f.info[0].lon, f.info[3].lat, f.info[3].lon);
  EXPECT_EQ(r.samples, 4u);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(r.acc_at_1, 0.5);
  EXPECT_NEAR(r.mean_error_km, (d1 + d3) / 2, 1e-9);
  EXPECT_NEAR(r.median_error_km, (d1 + d3) / 2, 1e-9);
  ASSERT_EQ(r.cdf.size(), 2u);
  EXPECT_NEAR(r.cdf[0].distance_km, std::min(d1, d3), 1e-9);
  EXPECT_NEAR(r.cdf[1].distance_km, std::max(d1, d3), 1e-9);
  EXPECT_EQ(r.cdf[0].cumulative_fraction, 0.5);
  EXPECT_EQ(r.cdf[1].cumulative_fraction, 1.0);
  EXPECT_EQ(preds[0].error_km, 0.0);
  // s0, s1 and s2 are target-absent; s0 and s2 hit.
  EXPECT_EQ(r.target_absent_samples, 3u);
  EXPECT_EQ(r.target_absent_hits, 2u);
  EXPECT_NEAR(r.target_absent_acc, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.target_absent_hit_rate, 0.5);
}

TEST(Summarize, ThreadedPredictionMatchesSerial) {
  FourSamples f;
  auto serial = f.run(1);
  auto threaded = f.run(3);
  ASSERT_EQ(serial.size(), threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].sample_id, threaded[i].sample_id);
    EXPECT_EQ(serial[i].predicted, threaded[i].predicted);
    EXPECT_EQ(serial[i].error_km, threaded[i].error_km);
  }
}

TEST(Summarize, ErrorsPropagateFromWorkers) {
  FourSamples f;
  auto boom = [](const PromptSequence&) -> std::size_t { throw std::runtime_error("boom"); };
  EXPECT_THROW(predict_samples(f.prompts, f.ids, f.info, boom, 2), std::runtime_error);
  std::vector<std::string> short_ids{"x"};
  EXPECT_THROW(predict_samples(f.prompts, short_ids, f.info, boom), std::invalid_argument);
}

TEST(Summarize, RandomPredictionsKeepInvariants) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lat(40.5, 41.0), lon(-74.2, -73.7);
  std::vector<PoiInfo> info(30);
  for (auto& p : info) p = {"c", lat(rng), lon(rng)};
  std::uniform_int_distribution<std::size_t> poi(0, 29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SamplePrediction> preds(200);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      auto& p = preds[i];
      p.target = poi(rng);
      p.predicted = rng() % 3 == 0 ? p.target : poi(rng);
      p.target_absent = rng() % 2 == 0;
      if (!p.hit())
        p.error_km = geo::haversine_km({info[p.predicted].lat, info[p.predicted].lon},
                                       {info[p.target].lat, info[p.target].lon});
    }
    auto r = summarize(preds);
    EXPECT_GE(r.acc_at_1, 0.0);
    EXPECT_LE(r.acc_at_1, 1.0);
    for (std::size_t i = 1; i < r.cdf.size(); ++i) {
      EXPECT_LT(r.cdf[i - 1].distance_km, r.cdf[i].distance_km);
      EXPECT_LT(r.cdf[i - 1].cumulative_fraction, r.cdf[i].cumulative_fraction);
    }
    if (!r.cdf.empty()) EXPECT_EQ(r.cdf.back().cumulative_fraction, 1.0);
    std::size_t absent = 0, present = 0, hits = 0;
    for (const auto& p : preds) {
      (p.target_absent ? absent : present) += 1;
      hits += p.hit();
    }
    EXPECT_EQ(absent + present, r.samples);
    EXPECT_EQ(r.target_absent_samples, absent);
    EXPECT_EQ(r.hits, hits);
  }
}

TEST(Export, MetricsRoundTrip) {
  FourSamples f;
  auto r = summarize(f.run());
  r.config_fingerprint = "00ff";
  auto path = temp_path("geopoi_metrics.csv");
  export_report(r, path, ReportKind::metrics_csv);
  auto text = slurp(path);
  EXPECT_TRUE(text.starts_with("name,value\n"));
  EXPECT_NE(text.find("\nacc_at_1,0.5\n"), std::string::npos);
  expect_same_report(parse_metrics_csv(path), r, 1e-9);
  std::filesystem::remove(path);
}

TEST(Export, CdfRoundTripAndEmptyCase) {
  FourSamples f;
  auto r = summarize(f.run());
  auto path = temp_path("geopoi_cdf.csv");
  export_report(r, path, ReportKind::cdf_csv);
  auto back = parse_cdf_csv(path);
  ASSERT_EQ(back.size(), r.cdf.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_NEAR(back[i].distance_km, r.cdf[i].distance_km, 1e-9);
    EXPECT_NEAR(back[i].cumulative_fraction, r.cdf[i].cumulative_fraction, 1e-9);
  }
  export_report(EvalReport{}, path, ReportKind::cdf_csv);
  EXPECT_EQ(slurp(path), "distance_km,cumulative_fraction\n");
  std::filesystem::remove(path);
}

TEST(Export, JsonRoundTrip) {
  FourSamples f;
  auto r = summarize(f.run());
  r.config_fingerprint = "abc";
  auto path = temp_path("geopoi_report.json");
  write_report_json(r, path);
  auto back = read_report_json(path);
  expect_same_report(back, r, 0.0);
  ASSERT_EQ(back.cdf.size(), r.cdf.size());
  EXPECT_EQ(back.cdf[1].distance_km, r.cdf[1].distance_km);
  std::filesystem::remove(path);
}

TEST(Export, Errors) {
  EXPECT_THROW(export_report(EvalReport{}, "/nonexistent-dir/x/metrics.csv", ReportKind::metrics_csv),
               std::runtime_error);
  EXPECT_THROW(parse_report_kind("png"), std::invalid_argument);
  EXPECT_EQ(parse_report_kind("cdf-csv"), ReportKind::cdf_csv);
  auto path = temp_path("geopoi_not_metrics.csv");
  std::ofstream(path) << "x,y\n";
  EXPECT_THROW(parse_metrics_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Vocab, MismatchNamesDivergentIds) {
  EXPECT_NO_THROW(check_vocabulary(Vocabulary({"a", "b"}), Vocabulary({"a", "b"})));
  try {
    check_vocabulary(Vocabulary({"a", "b", "c"}), Vocabulary({"a", "d"}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("b, c"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[d]"), std::string::npos) << msg;
  }
  try {
    check_vocabulary(Vocabulary({"a", "b"}), Vocabulary({"b", "a"}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("index 0"), std::string::npos);
  }
}

TEST(Evaluate, DumpRecountMatchesReport) {
  auto split = tiny_city("a", {40.75, -73.95}, 1);
  auto cfg = tiny_experiment();
  auto emb = SkipGramSource(cfg.sgns).embeddings(split);
  auto model = train(split, emb, cfg.model, Variant::full(), cfg.train);
  std::vector<SamplePrediction> dump;
  auto r = evaluate(model, split, split.test, 2, &dump);
  ASSERT_EQ(dump.size(), split.test.size());
  std::size_t hits = 0, absent = 0;
  for (std::size_t i = 0; i < dump.size(); ++i) {
    EXPECT_EQ(dump[i].sample_id, split.test[i].sample_id);
    EXPECT_EQ(dump[i].target, split.target_index(split.test[i]));
    auto seq = model.prompt(split.prefix(split.test[i]));
    EXPECT_EQ(dump[i].predicted, model.rank(seq).front());
    hits += dump[i].hit();
    absent += dump[i].target_absent;
  }
  EXPECT_EQ(r.hits, hits);
  EXPECT_DOUBLE_EQ(r.acc_at_1, static_cast<double>(hits) / static_cast<double>(dump.size()));
  EXPECT_EQ(r.target_absent_samples, absent);
  EXPECT_EQ(r.config_fingerprint, config_fingerprint(model));

  auto other = tiny_city("b", {35.68, 139.69}, 2);
  EXPECT_THROW(evaluate(model, other, other.test), std::invalid_argument);

  auto csv = temp_path("geopoi_predictions.csv");
  write_predictions_csv(dump, split.pois, csv);
  auto text = slurp(csv);
  EXPECT_TRUE(text.starts_with("sample_id,target,predicted,hit,target_absent,error_km\n"));
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), dump.size() + 1);
  std::filesystem::remove(csv);
}

TEST(Evaluate, FingerprintTracksVariantAndVocabulary) {
  auto split = tiny_city("a", {40.75, -73.95}, 1);
  auto emb = SkipGramSource(tiny_experiment().sgns).embeddings(split);
  TokenVocab tokens(split.users, split.categories);
  Recommender full(tiny_model(), Variant::full(), tokens, split.pois, emb, 1);
  Recommender again(tiny_model(), Variant::full(), tokens, split.pois, emb, 2);
  Recommender no_pam(tiny_model(), Variant::no_pam(), tokens, split.pois, emb, 1);
  EXPECT_EQ(config_fingerprint(full), config_fingerprint(again));
  EXPECT_NE(config_fingerprint(full), config_fingerprint(no_pam));
  EXPECT_EQ(config_fingerprint(full).size(), 16u);
}

TEST(Experiments, AblationTableShape) {
  auto split = tiny_city("a", {40.75, -73.95}, 3);
  const std::vector<std::uint64_t> seeds{1, 2};
  auto rows = run_ablations(split, tiny_experiment(), seeds);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].variant, Variant::full());
  EXPECT_EQ(rows[3].variant, Variant::no_pam());
  for (const auto& r : rows) {
    ASSERT_EQ(r.acc_per_seed.size(), 2u);
    EXPECT_DOUBLE_EQ(r.mean_acc, (r.acc_per_seed[0] + r.acc_per_seed[1]) / 2);
    EXPECT_EQ(r.reports.size(), 2u);
  }
  auto path = temp_path("geopoi_ablation.csv");
  write_ablation_csv(rows, seeds, path);
  auto text = slurp(path);
  EXPECT_TRUE(text.starts_with("variant,seed_1,seed_2,mean\nfull,"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  std::filesystem::remove(path);
  EXPECT_THROW(run_ablations(split, tiny_experiment(), {}), std::invalid_argument);
}

TEST(Experiments, CrossCityRowsAndDiagonal) {
  std::vector<City> cities{{"east", tiny_city("e", {40.75, -73.95}, 4)}, {"west", tiny_city("w", {34.05, -118.24}, 5)}};
  auto cfg = tiny_experiment();
  auto rows = cross_city(cities, cfg);
  ASSERT_EQ(rows.size(), 4u);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& r : rows) pairs.emplace_back(r.train_city, r.eval_city);
  EXPECT_EQ(pairs, (std::vector<std::pair<std::string, std::string>>{
                       {"east", "east"}, {"east", "west"}, {"west", "east"}, {"west", "west"}}));

  // The diagonal is a plain evaluation of the model trained on that city.
  auto sgns = cfg.sgns;
  sgns.seed = cfg.train.seed;
  auto emb = SkipGramSource(sgns, cfg.window).embeddings(cities[0].split);
  auto model = train(cities[0].split, emb, cfg.model, Variant::full(), cfg.train);
  expect_same_report(rows[0].report, evaluate(model, cities[0].split, cities[0].split.test), 0.0);
  expect_same_report(transfer_evaluate(model, cities[0].split, emb, cfg.train), rows[0].report, 0.0);
  EXPECT_EQ(rows[1].report.samples, cities[1].split.test.size());

  auto path = temp_path("geopoi_cross_city.csv");
  write_cross_city_csv(rows, path);
  EXPECT_TRUE(slurp(path).starts_with("train_city,eval_city,samples,acc_at_1,"));
  std::filesystem::remove(path);
}
