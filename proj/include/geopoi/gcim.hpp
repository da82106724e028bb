#pragma once

#include <span>
#include <string>
#include <vector>

#include "geopoi/autodiff.hpp"
#include "geopoi/checkpoint.hpp"
#include "geopoi/geo.hpp"
#include "geopoi/nn.hpp"

namespace geopoi {

struct GcimConfig {
  int level = 25;
  int ngram = 3;
  std::size_t gram_dim = 64;
  std::size_t key_dim = 64;
  std::size_t fourier_dim = 64;  // M, even
  double gamma = 1.0;
  std::size_t model_dim = 128;
  /// Feed digits / 3 instead of raw 0..3 into the Fourier features.
  bool normalize_digits = false;

  void validate() const;
  /// Rows of the position table: L - n + 1, or 1 when L < n.
  std::size_t gram_count() const;
  std::size_t vocab_size() const;  // 4^n
};

/// Geographic coordinate encoder: quadkey n-grams through single-head
/// self-attention, concatenated with learnable Fourier features of the digit
/// vector, then one affine map into the model dimension.
class Gcim {
 public:
  Gcim(const GcimConfig& config, nn::Rng& rng);

  const GcimConfig& config() const { return config_; }

  /// Mean-pooled attention output over the position-enhanced gram
  /// embeddings, shape (gram_dim).
  ad::Tensor attend_grams(const std::vector<std::string>& grams) const;

  /// (1/sqrt(M)) [cos(S W_s^T) || sin(S W_s^T)], shape (M). `digits` must
  /// have length L.
  ad::Tensor fourier_encode(std::span<const double> digits) const;

  /// Shape (model_dim).
  ad::Tensor encode(geo::LatLon where, bool fourier = true) const;

  /// One row per coordinate, shape (n x model_dim). With `fourier` off the
  /// Fourier block is zero before fusion.
  ad::Tensor encode_rows(std::span<const geo::LatLon> where, bool fourier = true) const;

  /// Digit vector S of a coordinate (after optional normalisation).
  std::vector<double> digit_vector(geo::LatLon where) const;

  NamedTensors parameters() const;

  ad::Tensor gram_table;      // 4^n x gram_dim
  ad::Tensor position_table;  // gram_count x gram_dim
  ad::Tensor w_q;             // gram_dim x key_dim
  ad::Tensor w_k;             // gram_dim x key_dim
  ad::Tensor w_v;             // gram_dim x gram_dim
  ad::Tensor w_s;             // M/2 x L
  nn::Linear fusion;          // (gram_dim + M) -> model_dim

 private:
  ad::Tensor attend_rows(const std::vector<std::vector<std::size_t>>& gram_ids) const;
  ad::Tensor fourier_rows(const ad::Tensor& digits) const;

  GcimConfig config_;
};

}  // namespace geopoi
