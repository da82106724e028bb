#pragma once

#include <random>

#include "geopoi/autodiff.hpp"

namespace geopoi::nn {

using Rng = std::mt19937_64;

/// Trainable tensor with i.i.d. N(0, stddev^2) entries.
ad::Tensor normal(ad::Shape shape, double stddev, Rng& rng);
/// Trainable tensor filled with `value`.
ad::Tensor filled(ad::Shape shape, double value);

/// x (n x in) -> x W + b, W stored (in x out).
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
};

}  // namespace geopoi::nn
