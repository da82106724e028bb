#include "geopoi/transition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "geopoi/checkpoint.hpp"

namespace geopoi {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(x)), stable for large |x|
double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

}  // namespace

std::vector<TransitionPair> extract_transition_pairs(std::span<const Trajectory> trajectories,
                                                     const Vocabulary& pois, int window) {
  if (window < 1) throw std::invalid_argument("transition window must be >= 1");
  std::vector<TransitionPair> pairs;
  for (const auto& t : trajectories) {
    for (auto [begin, end] : t.sessions()) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto a = pois.index(t.events[i].poi_id);
        for (std::size_t j = i + 1; j < end && j <= i + static_cast<std::size_t>(window); ++j) {
          const auto b = pois.index(t.events[j].poi_id);
          pairs.push_back({a, b});
          pairs.push_back({b, a});
        }
      }
    }
  }
  return pairs;
}

ad::Tensor PoiEmbeddingTable::to_tensor() const { return ad::Tensor::from({pois.size(), dim}, values); }

PoiEmbeddingTable PoiEmbeddingTable::aligned_to(const Vocabulary& target) const {
  PoiEmbeddingTable out{target, dim, std::vector<double>(target.size() * dim)};
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto src = pois.find(target.id(i));
    if (!src) {
      missing.push_back(target.id(i));
      continue;
    }
    auto r = row(*src);
    std::copy(r.begin(), r.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) list += (i ? ", " : "") + missing[i];
    throw std::invalid_argument(
        fmt::format("embedding table lacks {} POIs of the dataset (first: {})", missing.size(), list));
  }
  return out;
}

bool PoiEmbeddingTable::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

SgnsResult train_embeddings(std::span<const TransitionPair> pairs, const Vocabulary& pois,
                            const SgnsConfig& config) {
  if (pairs.empty()) throw std::invalid_argument("train_embeddings: no transition pairs");
  if (config.dim == 0 || config.negatives < 0 || config.epochs < 1)
    throw std::invalid_argument("train_embeddings: invalid configuration");
  const std::size_t n = pois.size();
  const std::size_t d = config.dim;
  for (const auto& p : pairs)
    if (p.center >= n || p.context >= n)
      throw std::out_of_range(fmt::format("transition pair ({}, {}) outside {} POIs", p.center, p.context, n));

  std::mt19937_64 rng(config.seed);
  std::vector<double> in(n * d), out(n * d, 0.0);
  {
    std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
    for (auto& v : in) v = init(rng);
  }

  // Cumulative unigram^0.75 over contexts.
  std::vector<double> cumulative(n, 0.0);
  {
    std::vector<double> counts(n, 0.0);
    for (const auto& p : pairs) counts[p.context] += 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cumulative[i] = (acc += std::pow(counts[i], 0.75));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_negative = [&] {
    const double u = unit(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(), static_cast<std::ptrdiff_t>(n) - 1));
  };

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad_in(d);
  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(pairs.size());
  double step = 0.0;

  SgnsResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (auto idx : order) {
      const auto& p = pairs[idx];
      const double lr = config.lr * std::max(1e-4, 1.0 - step / total_steps);
      step += 1.0;
      double* u = in.data() + p.center * d;
      std::fill(grad_in.begin(), grad_in.end(), 0.0);
      auto update = [&](std::size_t ctx, double label) {
        double* v = out.data() + ctx * d;
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += u[k] * v[k];
        loss += neg_log_sigmoid(label > 0 ? dot : -dot);
        const double g = lr * (label - sigmoid(dot));
        for (std::size_t k = 0; k < d; ++k) {
          grad_in[k] += g * v[k];
          v[k] += g * u[k];
        }
      };
      update(p.context, 1.0);
      for (int k = 0; k < config.negatives; ++k) {
        const auto neg = draw_negative();
        if (neg == p.context) continue;
        update(neg, 0.0);
      }
      for (std::size_t k = 0; k < d; ++k) u[k] += grad_in[k];
    }
    result.epoch_loss.push_back(loss / static_cast<double>(pairs.size()));
    spdlog::debug("skip-gram epoch {}: loss {:.6f}", epoch + 1, result.epoch_loss.back());
  }
  result.table = PoiEmbeddingTable{pois, d, std::move(in)};
  return result;
}

void save_embeddings(const std::filesystem::path& stem, const PoiEmbeddingTable& table) {
  save_tensors(stem, {{"poiemb.table", table.to_tensor()}});
  std::ofstream ids(stem.string() + ".ids");
  if (!ids) throw std::runtime_error(fmt::format("cannot write '{}.ids'", stem.string()));
  for (const auto& id : table.pois.ids()) ids << id << '\n';
}

PoiEmbeddingTable load_embeddings(const std::filesystem::path& stem) {
  auto tensors = load_tensors(stem);
  const auto& t = find_tensor(tensors, "poiemb.table");
  if (t.ndim() != 2) throw std::runtime_error("poiemb.table must be a matrix");
  std::ifstream in(stem.string() + ".ids");
  if (!in) throw std::runtime_error(fmt::format("cannot read '{}.ids'", stem.string()));
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ids.push_back(line);
  if (ids.size() != t.shape()[0])
    throw std::runtime_error(fmt::format("{} ids for {} embedding rows", ids.size(), t.shape()[0]));
  PoiEmbeddingTable table{Vocabulary(std::move(ids)), t.shape()[1], {t.values().begin(), t.values().end()}};
  if (!table.all_finite()) throw std::runtime_error("embedding table contains non-finite values");
  return table;
}

PoiEmbeddingTable SkipGramSource::embeddings(const DatasetSplit& split) const {
  auto trajectories = split.train_trajectories();
  auto pairs = extract_transition_pairs(trajectories, split.pois, window_);
  return train_embeddings(pairs, split.pois, config_).table;
}

PoiEmbeddingTable FileSource::embeddings(const DatasetSplit& split) const {
  return load_embeddings(stem_).aligned_to(split.pois);
}

}  // namespace geopoi
