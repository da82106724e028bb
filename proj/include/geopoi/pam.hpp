#pragma once

#include <span>
#include <vector>

#include "geopoi/autodiff.hpp"
#include "geopoi/checkpoint.hpp"
#include "geopoi/nn.hpp"

namespace geopoi {

/// Single affine projector from transition-embedding space (d) into the
/// model space (D): h = W e + b with W stored D x d.
class Pam {
 public:
  Pam(std::size_t input_dim, std::size_t model_dim, nn::Rng& rng);

  std::size_t input_dim() const { return weight.shape()[1]; }
  std::size_t model_dim() const { return weight.shape()[0]; }

  /// e: shape (d) -> shape (D).
  ad::Tensor align(const ad::Tensor& e) const;
  /// E: (n x d) -> (n x D).
  ad::Tensor align_rows(const ad::Tensor& e) const;

  NamedTensors parameters() const;

  ad::Tensor weight;  // D x d
  ad::Tensor bias;    // D
};

/// Returns `text` (n x D) with row slots[i] replaced by aligned row i.
/// Slots must be strictly increasing; the row count must match.
ad::Tensor splice(const ad::Tensor& text, std::span<const std::size_t> slots, const ad::Tensor& aligned);
ad::Tensor splice(const ad::Tensor& text, std::span<const std::size_t> slots,
                  const std::vector<ad::Tensor>& aligned);

}  // namespace geopoi
