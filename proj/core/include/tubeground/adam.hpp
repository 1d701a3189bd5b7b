#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tubeground/graph.hpp"

namespace tubeground::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected first/second moments.
class AdamOptimizer {
 public:
  using Config = AdamConfig;

  AdamOptimizer() = default;
  explicit AdamOptimizer(std::vector<Parameter*> params, Config config = Config());

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Throws NumericError naming the parameter if a gradient is non-finite.
  void step();

  std::int64_t step_count() const { return step_count_; }
  const Config& config() const { return config_; }
  std::vector<Parameter*>& parameters() { return params_; }

  /// Moment tensors keyed by parameter name, for checkpointing.
  struct MomentState {
    Tensor first;
    Tensor second;
  };
  const std::map<std::string, MomentState>& moments() const { return moments_; }
  void restore(std::int64_t step_count, std::map<std::string, MomentState> moments);

 private:
  std::vector<Parameter*> params_;
  Config config_;
  std::map<std::string, MomentState> moments_;
  std::int64_t step_count_ = 0;
};

}  // namespace tubeground::nn
