#include "tubeground/adam.hpp"

#include <cmath>

#include "tubeground/errors.hpp"

namespace tubeground::nn {

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, Config config)
    : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    moments_[p->name] = MomentState{Tensor(p->value.shape()), Tensor(p->value.shape())};
  }
}

void AdamOptimizer::step() {
  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (Parameter* p : params_) {
    if (!p->gradient.all_finite()) {
      throw NumericError("non-finite gradient for parameter " + p->name);
    }
    MomentState& m = moments_.at(p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->gradient[i];
      m.first[i] = b1 * m.first[i] + (1.0 - b1) * g;
      m.second[i] = b2 * m.second[i] + (1.0 - b2) * g * g;
      const double mhat = m.first[i] / bc1;
      const double vhat = m.second[i] / bc2;
      p->value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    if (!p->value.all_finite()) {
      throw NumericError("non-finite value after update for parameter " + p->name);
    }
    p->zero_grad();
  }
}

void AdamOptimizer::restore(std::int64_t step_count,
                            std::map<std::string, MomentState> moments) {
  step_count_ = step_count;
  for (auto& [name, state] : moments) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      throw DataError("optimizer state for unknown parameter " + name);
    }
    it->second = std::move(state);
  }
}

}  // namespace tubeground::nn
