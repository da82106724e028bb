#include "geopoi/pam.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi {

Pam::Pam(std::size_t input_dim, std::size_t model_dim, nn::Rng& rng)
    : weight(nn::normal({model_dim, input_dim}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng)),
      bias(nn::filled({model_dim}, 0.0)) {}

ad::Tensor Pam::align(const ad::Tensor& e) const {
  if (e.size() != input_dim())
    throw std::invalid_argument(
        fmt::format("pam: embedding of shape {} but projector expects {}", ad::shape_string(e.shape()), input_dim()));
  for (double v : e.values())
    if (!std::isfinite(v)) throw std::invalid_argument("pam: non-finite embedding");
  return ad::reshape(align_rows(ad::reshape(e, {1, input_dim()})), {model_dim()});
}

ad::Tensor Pam::align_rows(const ad::Tensor& e) const {
  if (e.ndim() != 2 || e.shape()[1] != input_dim())
    throw std::invalid_argument(
        fmt::format("pam: embeddings of shape {} but projector expects (n, {})", ad::shape_string(e.shape()), input_dim()));
  return ad::add(ad::matmul(e, ad::transpose(weight)), ad::repeat_rows(bias, e.shape()[0]));
}

NamedTensors Pam::parameters() const { return {{"pam.weight", weight}, {"pam.bias", bias}}; }

ad::Tensor splice(const ad::Tensor& text, std::span<const std::size_t> slots, const ad::Tensor& aligned) {
  if (slots.empty()) {
    if (aligned.defined() && aligned.size() != 0)
      throw std::invalid_argument("splice: replacement rows given without slots");
    return text;
  }
  if (!aligned.defined() || aligned.rows() != slots.size())
    throw std::invalid_argument(fmt::format("splice: {} slots but {} aligned vectors", slots.size(),
                                            aligned.defined() ? aligned.rows() : 0));
  return ad::scatter_rows(text, slots, aligned);
}

ad::Tensor splice(const ad::Tensor& text, std::span<const std::size_t> slots,
                  const std::vector<ad::Tensor>& aligned) {
  if (aligned.size() != slots.size())
    throw std::invalid_argument(fmt::format("splice: {} slots but {} aligned vectors", slots.size(), aligned.size()));
  if (slots.empty()) return text;
  std::vector<ad::Tensor> rows;
  rows.reserve(aligned.size());
  for (const auto& a : aligned) rows.push_back(ad::reshape(a, {1, a.size()}));
  return splice(text, slots, ad::concat(rows, 0));
}

}  // namespace geopoi
