#include "geopoi/nn.hpp"

#include <cmath>

namespace geopoi::nn {

ad::Tensor normal(ad::Shape shape, double stddev, Rng& rng) {
  ad::Tensor t = ad::Tensor::zeros(std::move(shape), true);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.mutable_values()) v = dist(rng);
  return t;
}

ad::Tensor filled(ad::Shape shape, double value) {
  ad::Tensor t = ad::Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_values()) v = value;
  return t;
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  return {normal({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng), filled({out}, 0.0)};
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  return ad::add(ad::matmul(x, weight), ad::repeat_rows(bias, x.rows()));
}

}  // namespace geopoi::nn
