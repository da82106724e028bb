#include "geopoi/gcim.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi {

void GcimConfig::validate() const {
  if (level < 1 || level > geo::kMaxLevel)
    throw std::invalid_argument(fmt::format("gcim: level {} outside [1, {}]", level, geo::kMaxLevel));
  if (ngram < 1 || ngram > 8) throw std::invalid_argument(fmt::format("gcim: n-gram width {} outside [1, 8]", ngram));
  if (gram_dim == 0 || key_dim == 0 || fourier_dim == 0 || model_dim == 0)
    throw std::invalid_argument("gcim: dimensions must be >= 1");
  if (fourier_dim % 2 != 0) throw std::invalid_argument(fmt::format("gcim: fourier dim {} must be even", fourier_dim));
  if (!(gamma > 0.0)) throw std::invalid_argument("gcim: gamma must be positive");
}

std::size_t GcimConfig::gram_count() const {
  return level >= ngram ? static_cast<std::size_t>(level - ngram + 1) : 1;
}

std::size_t GcimConfig::vocab_size() const { return std::size_t{1} << (2 * ngram); }

Gcim::Gcim(const GcimConfig& config, nn::Rng& rng) : config_(config) {
  config_.validate();
  const auto dg = config_.gram_dim;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(dg));
  gram_table = nn::normal({config_.vocab_size(), dg}, emb_std, rng);
  position_table = nn::normal({config_.gram_count(), dg}, emb_std, rng);
  w_q = nn::normal({dg, config_.key_dim}, emb_std, rng);
  w_k = nn::normal({dg, config_.key_dim}, emb_std, rng);
  w_v = nn::normal({dg, dg}, emb_std, rng);
  // W_s ~ N(0, gamma^-2)
  w_s = nn::normal({config_.fourier_dim / 2, static_cast<std::size_t>(config_.level)}, 1.0 / config_.gamma, rng);
  fusion = nn::Linear::init(dg + config_.fourier_dim, config_.model_dim, rng);
}

std::vector<double> Gcim::digit_vector(geo::LatLon where) const {
  auto key = geo::quadkey(where.lat, where.lon, config_.level);
  std::vector<double> s;
  s.reserve(key.digits.size());
  const double div = config_.normalize_digits ? 3.0 : 1.0;
  for (int d : key.values()) s.push_back(static_cast<double>(d) / div);
  return s;
}

ad::Tensor Gcim::attend_rows(const std::vector<std::vector<std::size_t>>& gram_ids) const {
  const std::size_t g = config_.gram_count();
  std::vector<std::size_t> flat, positions;
  flat.reserve(gram_ids.size() * g);
  for (const auto& ids : gram_ids) {
    if (ids.size() != g)
      throw std::invalid_argument(fmt::format("gcim: expected {} grams, got {}", g, ids.size()));
    flat.insert(flat.end(), ids.begin(), ids.end());
    for (std::size_t p = 0; p < g; ++p) positions.push_back(p);
  }
  auto x = ad::add(ad::embedding_gather(gram_table, flat), ad::embedding_gather(position_table, positions));
  auto q = ad::matmul(x, w_q);
  auto k = ad::matmul(x, w_k);
  auto v = ad::matmul(x, w_v);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(config_.key_dim));

  std::vector<ad::Tensor> pooled;
  pooled.reserve(gram_ids.size());
  for (std::size_t i = 0; i < gram_ids.size(); ++i) {
    auto qi = ad::slice(q, i * g, (i + 1) * g);
    auto ki = ad::slice(k, i * g, (i + 1) * g);
    auto vi = ad::slice(v, i * g, (i + 1) * g);
    auto weights = ad::softmax_rows(ad::scale(ad::matmul(qi, ad::transpose(ki)), inv_sqrt_dk));
    pooled.push_back(ad::mean_rows(ad::matmul(weights, vi)));
  }
  return pooled.size() == 1 ? pooled.front() : ad::concat(pooled, 0);
}

ad::Tensor Gcim::fourier_rows(const ad::Tensor& digits) const {
  auto proj = ad::matmul(digits, ad::transpose(w_s));
  auto features = ad::concat({ad::cos(proj), ad::sin(proj)}, 1);
  return ad::scale(features, 1.0 / std::sqrt(static_cast<double>(config_.fourier_dim)));
}

ad::Tensor Gcim::attend_grams(const std::vector<std::string>& grams) const {
  std::vector<std::size_t> ids;
  ids.reserve(grams.size());
  for (const auto& gram : grams) {
    if (gram.size() != static_cast<std::size_t>(config_.ngram))
      throw std::invalid_argument(fmt::format("gcim: gram '{}' is not {} digits", gram, config_.ngram));
    ids.push_back(geo::gram_index(gram));
  }
  return ad::reshape(attend_rows({ids}), {config_.gram_dim});
}

ad::Tensor Gcim::fourier_encode(std::span<const double> digits) const {
  if (digits.size() != static_cast<std::size_t>(config_.level))
    throw std::invalid_argument(
        fmt::format("gcim: digit vector has length {}, W_s expects {}", digits.size(), config_.level));
  auto s = ad::Tensor::from({1, digits.size()}, std::vector<double>(digits.begin(), digits.end()));
  return ad::reshape(fourier_rows(s), {config_.fourier_dim});
}

ad::Tensor Gcim::encode(geo::LatLon where, bool fourier) const {
  return ad::reshape(encode_rows(std::span<const geo::LatLon>(&where, 1), fourier), {config_.model_dim});
}

ad::Tensor Gcim::encode_rows(std::span<const geo::LatLon> where, bool fourier) const {
  if (where.empty()) throw std::invalid_argument("gcim: no coordinates to encode");
  const auto level = static_cast<std::size_t>(config_.level);
  std::vector<std::vector<std::size_t>> gram_ids;
  std::vector<double> digits;
  gram_ids.reserve(where.size());
  digits.reserve(where.size() * level);
  for (const auto& p : where) {
    auto key = geo::quadkey(p.lat, p.lon, config_.level);
    std::vector<std::size_t> ids;
    for (const auto& gram : geo::ngrams(key, config_.ngram)) ids.push_back(geo::gram_index(gram));
    gram_ids.push_back(std::move(ids));
    const double div = config_.normalize_digits ? 3.0 : 1.0;
    for (int d : key.values()) digits.push_back(static_cast<double>(d) / div);
  }
  auto attended = attend_rows(gram_ids);
  ad::Tensor fourier_block =
      fourier ? fourier_rows(ad::Tensor::from({where.size(), level}, std::move(digits)))
              : ad::Tensor::zeros({where.size(), config_.fourier_dim});
  return fusion(ad::concat({attended, fourier_block}, 1));
}

NamedTensors Gcim::parameters() const {
  return {{"gcim.gram_table", gram_table}, {"gcim.position_table", position_table},
          {"gcim.w_q", w_q},               {"gcim.w_k", w_k},
          {"gcim.w_v", w_v},               {"gcim.w_s", w_s},
          {"gcim.fusion.weight", fusion.weight}, {"gcim.fusion.bias", fusion.bias}};
}

}  // namespace geopoi
