#include <cmath>
#include <filesystem>
#include <random>

#include <fmt/format.h>

#include <gtest/gtest.h>

#include "geopoi/transition.hpp"
#include "synthetic.hpp"

using namespace geopoi;

namespace {

CheckIn ev(std::string poi, Timestamp t) { return {"u", std::move(poi), "c", 1.0, 2.0, t}; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Pairs, WithinSessionBothDirections) {
  Vocabulary pois({"a", "b", "c", "d"});
  // a b c | d (gap of 2 days before d)
  std::vector<CheckIn> rows{ev("a", 0), ev("b", 3600), ev("c", 7200), ev("d", 7200 + 48 * 3600)};
  auto tr = build_trajectories(rows);
  auto pairs = extract_transition_pairs(tr, pois, 1);
  std::vector<TransitionPair> want{{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  EXPECT_EQ(pairs, want);
  auto wide = extract_transition_pairs(tr, pois, 2);
  EXPECT_EQ(wide.size(), 6u);
  EXPECT_THROW(extract_transition_pairs(tr, pois, 0), std::invalid_argument);
}

TEST(Sgns, LossDecreasesAndIsDeterministic) {
  fixtures::CycleSpec spec;
  spec.users = 20;
  spec.events = 60;
  auto split = split_chronological(build_trajectories(fixtures::transition_cycle(spec, 3)));
  auto tr = split.train_trajectories();
  auto pairs = extract_transition_pairs(tr, split.pois, 1);
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  auto result = train_embeddings(pairs, split.pois, cfg);
  ASSERT_EQ(result.epoch_loss.size(), 5u);
  EXPECT_LT(result.epoch_loss.back(), result.epoch_loss.front());
  EXPECT_TRUE(result.table.all_finite());
  EXPECT_EQ(result.table.values.size(), split.pois.size() * 16);

  auto again = train_embeddings(pairs, split.pois, cfg);
  EXPECT_EQ(again.table.values, result.table.values);
}

TEST(Sgns, RejectsBadInput) {
  Vocabulary pois({"a"});
  EXPECT_THROW(train_embeddings({}, pois), std::invalid_argument);
  std::vector<TransitionPair> bad{{0, 3}};
  EXPECT_THROW(train_embeddings(bad, pois), std::out_of_range);
}

TEST(Table, AlignAndPersist) {
  PoiEmbeddingTable t{Vocabulary({"x", "y", "z"}), 2, {1, 2, 3, 4, 5, 6}};
  auto aligned = t.aligned_to(Vocabulary({"z", "x"}));
  EXPECT_EQ(aligned.values, (std::vector<double>{5, 6, 1, 2}));
  EXPECT_THROW(t.aligned_to(Vocabulary({"x", "w"})), std::invalid_argument);
  EXPECT_EQ(dot(t.row(1), t.row(2)), 3 * 5 + 4 * 6);

  auto stem = std::filesystem::temp_directory_path() / "geopoi_poiemb_test";
  save_embeddings(stem, t);
  auto back = load_embeddings(stem);
  EXPECT_EQ(back.pois.ids(), t.pois.ids());
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.dim, 2u);
  for (auto ext : {".bin", ".index", ".ids"}) std::filesystem::remove(stem.string() + ext);
  EXPECT_THROW(load_embeddings(stem), std::runtime_error);
}

TEST(Pairs, ShortSessionsAndBoundaries) {
  Vocabulary pois({"a", "b", "c"});
  auto single = build_trajectories(std::vector<CheckIn>{ev("a", 0)});
  EXPECT_TRUE(extract_transition_pairs(single, pois).empty());
  auto split = build_trajectories(std::vector<CheckIn>{ev("a", 0), ev("b", 3600), ev("c", 3600 + 30 * 3600)});
  auto pairs = extract_transition_pairs(split, pois);
  EXPECT_EQ(pairs, (std::vector<TransitionPair>{{0, 1}, {1, 0}}));
}

TEST(Sgns, LossStrictlyDecreasesOverFiveEpochs) {
  fixtures::CycleSpec spec;
  spec.users = 10;
  spec.events = 40;
  auto rows = fixtures::transition_cycle(spec, 5);
  auto tr = build_trajectories(rows);
  Vocabulary pois = split_chronological(tr).pois;
  auto pairs = extract_transition_pairs(tr, pois);
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  auto result = train_embeddings(pairs, pois, cfg);
  for (std::size_t i = 1; i < result.epoch_loss.size(); ++i) EXPECT_LT(result.epoch_loss[i], result.epoch_loss[i - 1]);
  EXPECT_EQ(result.table.dim, 16u);
  EXPECT_EQ(result.table.pois.size(), pois.size());
}

TEST(Sgns, TwoClusterGraphSeparates) {
  // POIs a0..a4 only transition among themselves, likewise b0..b4.
  std::vector<std::string> ids;
  for (auto c : {"a", "b"})
    for (int i = 0; i < 5; ++i) ids.push_back(fmt::format("{}{}", c, i));
  Vocabulary pois(ids);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  std::vector<TransitionPair> pairs;
  for (int i = 0; i < 4000; ++i) {
    const std::size_t base = i % 2 == 0 ? 0 : 5;
    const auto x = base + pick(rng), y = base + pick(rng);
    if (x == y) continue;
    pairs.push_back({x, y});
    pairs.push_back({y, x});
  }
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.seed = 7;
  auto table = train_embeddings(pairs, pois, cfg).table;
  auto cosine = [&](std::size_t i, std::size_t j) {
    return dot(table.row(i), table.row(j)) / std::sqrt(dot(table.row(i), table.row(i)) * dot(table.row(j), table.row(j)));
  };
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = i + 1; j < 10; ++j) {
      if ((i < 5) == (j < 5)) {
        intra += cosine(i, j);
        ++n_intra;
      } else {
        inter += cosine(i, j);
        ++n_inter;
      }
    }
  EXPECT_GT(intra / n_intra, inter / n_inter);
}

TEST(Sgns, DefaultShape) {
  Vocabulary pois({"a", "b", "c"});
  std::vector<TransitionPair> pairs{{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  auto result = train_embeddings(pairs, pois);
  EXPECT_EQ(result.table.to_tensor().shape(), (ad::Shape{3, 128}));
}
