#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geopoi/autodiff.hpp"

namespace geopoi {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients and clears them.
  /// Throws std::logic_error if any parameter has no gradient.
  void step();

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::int64_t t_ = 0;
};

}  // namespace geopoi
