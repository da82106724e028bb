#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "geopoi/gcim.hpp"
#include "gradcheck.hpp"

using namespace geopoi;
using geopoi::fixtures::gradcheck;
using geopoi::fixtures::probe;

namespace {

GcimConfig small_config() {
  GcimConfig c;
  c.level = 6;
  c.ngram = 2;
  c.gram_dim = 4;
  c.key_dim = 3;
  c.fourier_dim = 6;
  c.model_dim = 5;
  return c;
}

// Mean over rows of softmax(Q K^T / sqrt(dk)) V, written with plain loops.
std::vector<double> reference_attention(const Gcim& g, const std::vector<std::size_t>& ids) {
  const auto& c = g.config();
  const std::size_t n = ids.size(), dg = c.gram_dim, dk = c.key_dim;
  auto at = [](const ad::Tensor& t, std::size_t r, std::size_t col) { return t.values()[r * t.cols() + col]; };
  std::vector<std::vector<double>> x(n, std::vector<double>(dg));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dg; ++j) x[i][j] = at(g.gram_table, ids[i], j) + at(g.position_table, i, j);
  auto project = [&](const ad::Tensor& w, std::size_t out) {
    std::vector<std::vector<double>> y(n, std::vector<double>(out, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t j = 0; j < dg; ++j) y[i][o] += x[i][j] * at(w, j, o);
    return y;
  };
  auto q = project(g.w_q, dk), k = project(g.w_k, dk), v = project(g.w_v, dg);
  std::vector<double> pooled(dg, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    double mx = -INFINITY, z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = 0.0;
      for (std::size_t t = 0; t < dk; ++t) s[j] += q[i][t] * k[j][t];
      s[j] /= std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, s[j]);
    }
    for (auto& e : s) z += (e = std::exp(e - mx));
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < dg; ++t) pooled[t] += s[j] / z * v[j][t] / static_cast<double>(n);
  }
  return pooled;
}

std::vector<double> values_of(const ad::Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(GcimConfigTest, DerivedSizesAndValidation) {
  GcimConfig c;
  EXPECT_EQ(c.gram_count(), 23u);
  EXPECT_EQ(c.vocab_size(), 64u);
  c.level = 2;
  EXPECT_EQ(c.gram_count(), 1u);
  c = GcimConfig{};
  c.fourier_dim = 7;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GcimConfig{};
  c.level = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GcimConfig{};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GcimTest, ParameterShapes) {
  nn::Rng rng(1);
  Gcim g(GcimConfig{}, rng);
  EXPECT_EQ(g.gram_table.shape(), (ad::Shape{64, 64}));
  EXPECT_EQ(g.position_table.shape(), (ad::Shape{23, 64}));
  EXPECT_EQ(g.w_s.shape(), (ad::Shape{32, 25}));
  EXPECT_EQ(g.fusion.weight.shape(), (ad::Shape{128, 128}));
  EXPECT_EQ(g.encode({40.7, -74.0}).shape(), (ad::Shape{128}));
  EXPECT_EQ(g.parameters().size(), 8u);
}

TEST(GcimTest, FourierFeaturesHaveConstantNorm) {
  nn::Rng rng(2);
  for (bool normalize : {false, true}) {
    GcimConfig c;
    c.normalize_digits = normalize;
    Gcim g(c, rng);
    std::mt19937_64 pick(3);
    std::uniform_real_distribution<double> lat(-85, 85), lon(-180, 180);
    for (int i = 0; i < 50; ++i) {
      auto s = g.digit_vector({lat(pick), lon(pick)});
      auto f = g.fourier_encode(s);
      ASSERT_EQ(f.size(), 64u);
      double n2 = 0.0;
      for (double v : f.values()) n2 += v * v;
      EXPECT_NEAR(n2, 0.5, 1e-12);
    }
  }
}

TEST(GcimTest, FourierRejectsWrongLength) {
  nn::Rng rng(2);
  Gcim g(GcimConfig{}, rng);
  std::vector<double> s(24, 1.0);
  EXPECT_THROW(g.fourier_encode(s), std::invalid_argument);
}

TEST(GcimTest, DigitVectorFollowsQuadkey) {
  nn::Rng rng(4);
  auto c = small_config();
  Gcim raw(c, rng);
  c.normalize_digits = true;
  Gcim norm(c, rng);
  auto key = geo::quadkey(48.85, 2.35, 6);
  auto a = raw.digit_vector({48.85, 2.35});
  auto b = norm.digit_vector({48.85, 2.35});
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a[i], key.digits[i] - '0');
    EXPECT_DOUBLE_EQ(b[i], a[i] / 3.0);
  }
}

TEST(GcimTest, AttentionMatchesLoopReference) {
  nn::Rng rng(5);
  auto c = small_config();
  Gcim g(c, rng);
  auto key = geo::quadkey(35.68, 139.69, c.level);
  auto grams = geo::ngrams(key, c.ngram);
  std::vector<std::size_t> ids;
  for (const auto& s : grams) ids.push_back(geo::gram_index(s));
  auto got = g.attend_grams(grams);
  auto want = reference_attention(g, ids);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.values()[i], want[i], 1e-12);
}

TEST(GcimTest, EncodeIsFusionOfBothBranches) {
  nn::Rng rng(6);
  auto c = small_config();
  Gcim g(c, rng);
  geo::LatLon p{-33.87, 151.21};
  auto key = geo::quadkey(p.lat, p.lon, c.level);
  auto attended = g.attend_grams(geo::ngrams(key, c.ngram));
  auto fourier = g.fourier_encode(g.digit_vector(p));
  for (bool with_fourier : {true, false}) {
    auto got = g.encode(p, with_fourier);
    for (std::size_t o = 0; o < c.model_dim; ++o) {
      double want = g.fusion.bias.values()[o];
      for (std::size_t i = 0; i < c.gram_dim; ++i) want += attended.values()[i] * g.fusion.weight.at(i, o);
      if (with_fourier)
        for (std::size_t i = 0; i < c.fourier_dim; ++i)
          want += fourier.values()[i] * g.fusion.weight.at(c.gram_dim + i, o);
      EXPECT_NEAR(got.values()[o], want, 1e-12);
    }
  }
}

TEST(GcimTest, RowsMatchSingleEncodings) {
  nn::Rng rng(7);
  Gcim g(small_config(), rng);
  std::vector<geo::LatLon> where{{40.7, -74.0}, {51.5, -0.12}, {40.7, -74.0}};
  auto rows = g.encode_rows(where);
  for (std::size_t r = 0; r < where.size(); ++r) {
    auto single = g.encode(where[r]);
    for (std::size_t o = 0; o < single.size(); ++o) EXPECT_NEAR(rows.at(r, o), single.values()[o], 1e-12);
  }
  EXPECT_THROW(g.encode_rows(std::span<const geo::LatLon>{}), std::invalid_argument);
}

TEST(GcimTest, NearbyPointsShareLongPrefix) {
  nn::Rng rng(8);
  Gcim g(GcimConfig{}, rng);
  auto a = g.encode({40.75800, -73.98550});
  auto b = g.encode({40.75801, -73.98551});
  auto far = g.encode({-33.86, 151.21});
  double near_d = 0, far_d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    near_d += std::pow(a.values()[i] - b.values()[i], 2);
    far_d += std::pow(a.values()[i] - far.values()[i], 2);
  }
  EXPECT_LT(near_d, far_d);
}

TEST(GcimTest, GradientsEndToEnd) {
  nn::Rng rng(9);
  Gcim g(small_config(), rng);
  std::vector<geo::LatLon> where{{40.7, -74.0}, {48.85, 2.35}};
  std::vector<ad::Tensor> inputs;
  for (const auto& [name, t] : g.parameters()) inputs.push_back(t);
  EXPECT_LT(gradcheck([&] { return probe(g.encode_rows(where)); }, inputs), 1e-4);
  EXPECT_LT(gradcheck([&] { return probe(g.encode_rows(where, false)); }, inputs), 1e-4);
}

TEST(GcimTest, NoFourierLeavesFrequenciesWithoutGradient) {
  nn::Rng rng(10);
  Gcim g(small_config(), rng);
  {
    ad::Tape tape;
    tape.backward(probe(g.encode({1.0, 2.0}, false)));
  }
  bool any = false;
  if (g.w_s.has_grad())
    for (double v : g.w_s.grad()) any = any || v != 0.0;
  EXPECT_FALSE(any);
  EXPECT_TRUE(g.w_q.has_grad());
}

namespace {

std::vector<double> times_v(const Gcim& g, std::span<const double> x) {
  const auto dg = g.config().gram_dim;
  std::vector<double> out(dg, 0.0);
  for (std::size_t o = 0; o < dg; ++o)
    for (std::size_t j = 0; j < dg; ++j) out[o] += x[j] * g.w_v.at(j, o);
  return out;
}

}  // namespace

TEST(GcimExamples, IdenticalGramsGiveUniformAttention) {
  nn::Rng rng(11);
  Gcim g(small_config(), rng);
  std::fill(g.position_table.mutable_values().begin(), g.position_table.mutable_values().end(), 0.0);
  std::vector<std::string> grams(g.config().gram_count(), "21");
  auto got = g.attend_grams(grams);
  const auto dg = g.config().gram_dim;
  auto row = g.gram_table.values().subspan(geo::gram_index("21") * dg, dg);
  auto want = times_v(g, row);
  for (std::size_t i = 0; i < dg; ++i) EXPECT_NEAR(got.values()[i], want[i], 1e-12);
}

TEST(GcimExamples, SingleGramIsValueProjection) {
  auto c = small_config();
  c.level = 2;
  nn::Rng rng(12);
  Gcim g(c, rng);
  ASSERT_EQ(c.gram_count(), 1u);
  auto got = g.attend_grams({"13"});
  std::vector<double> x(c.gram_dim);
  for (std::size_t j = 0; j < c.gram_dim; ++j)
    x[j] = g.gram_table.at(geo::gram_index("13"), j) + g.position_table.at(0, j);
  auto want = times_v(g, x);
  for (std::size_t i = 0; i < c.gram_dim; ++i) EXPECT_NEAR(got.values()[i], want[i], 1e-12);
}

TEST(GcimExamples, PermutingGramsWithPositionsKeepsPooledOutput) {
  nn::Rng rng(13);
  Gcim g(small_config(), rng);
  auto grams = geo::ngrams(geo::quadkey(52.52, 13.40, g.config().level), g.config().ngram);
  auto base = g.attend_grams(grams);
  std::vector<std::size_t> perm(grams.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  auto original = g.position_table.clone();
  std::vector<std::string> permuted(grams.size());
  const auto dg = g.config().gram_dim;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    permuted[i] = grams[perm[i]];
    for (std::size_t j = 0; j < dg; ++j) g.position_table.mutable_values()[i * dg + j] = original.at(perm[i], j);
  }
  auto moved = g.attend_grams(permuted);
  for (std::size_t i = 0; i < dg; ++i) EXPECT_NEAR(moved.values()[i], base.values()[i], 1e-12);
}

TEST(GcimExamples, ZeroDigitsGiveCosineOnes) {
  nn::Rng rng(14);
  Gcim g(GcimConfig{}, rng);
  std::vector<double> zeros(25, 0.0);
  auto f = g.fourier_encode(zeros);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_DOUBLE_EQ(f.values()[i], 1.0 / 8.0);
  for (std::size_t i = 32; i < 64; ++i) EXPECT_DOUBLE_EQ(f.values()[i], 0.0);
}

TEST(GcimExamples, FourierGradientWrtFrequencies) {
  nn::Rng rng(15);
  Gcim g(small_config(), rng);
  auto s = g.digit_vector({40.7, -74.0});
  EXPECT_LT(gradcheck([&] { return probe(g.fourier_encode(s)); }, {g.w_s}), 1e-4);
}

TEST(GcimExamples, IdentityFusionExposesFourierBlock) {
  auto c = small_config();
  c.model_dim = c.fourier_dim;
  nn::Rng rng(16);
  Gcim g(c, rng);
  auto w = g.fusion.weight.mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < c.fourier_dim; ++i) w[(c.gram_dim + i) * c.model_dim + i] = 1.0;
  std::fill(g.fusion.bias.mutable_values().begin(), g.fusion.bias.mutable_values().end(), 0.0);
  std::fill(g.w_v.mutable_values().begin(), g.w_v.mutable_values().end(), 0.0);
  geo::LatLon p{37.77, -122.42};
  auto got = g.encode(p);
  auto want = g.fourier_encode(g.digit_vector(p));
  for (std::size_t i = 0; i < c.model_dim; ++i) EXPECT_EQ(got.values()[i], want.values()[i]);
  EXPECT_EQ(values_of(g.encode(p)), values_of(got));
}
