#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <cstdint>
#include <vector>

namespace rehabsnn::math {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter set. Moment buffers are shaped
// like the parameters at construction time.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  // Applies one update from the parameters' accumulated gradients.
  // Throws NumericalError (leaving parameters untouched) if any gradient is non-finite.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::int64_t step_ = 0;
};

// target <- (1 - tau) * target + tau * online, elementwise over matched parameter lists.
void polyak_average(const std::vector<Parameter*>& target, const std::vector<Parameter*>& online, double tau);

// Copies values (not gradients) between matched parameter lists.
void copy_values(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source);

}  // namespace rehabsnn::math
