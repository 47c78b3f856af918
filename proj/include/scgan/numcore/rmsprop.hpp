#pragma once

#include <algorithm>
#include <cmath>

#include "scgan/numcore/matrix.hpp"

namespace scgan {

struct RmsPropConfig
{
  double learning_rate = 0.001;
  double decay         = 0.9;
  double epsilon       = 1e-8;
};

/// Running average of squared gradients for one parameter matrix.
class RmsPropState
{
public:
  RmsPropState() = default;
  explicit RmsPropState(RmsPropConfig cfg) : cfg_(cfg)
  {
    if (!(cfg.learning_rate > 0.0) || !(cfg.decay >= 0.0 && cfg.decay < 1.0) || !(cfg.epsilon > 0.0))
    {
      throw ValidationError("rmsprop: need learning_rate > 0, decay in [0,1), epsilon > 0");
    }
  }

  RmsPropConfig const &config() const noexcept { return cfg_; }
  Matrix const        &accumulator() const noexcept { return acc_; }

  /// param - lr * g / sqrt(acc + eps) with acc <- decay * acc + (1 - decay) * g^2.
  void apply(Matrix &param, Matrix const &grad)
  {
    param.require_same_shape(grad, "rmsprop_step");
    if (acc_.empty())
    {
      acc_ = Matrix(param.rows(), param.cols());
    }
    acc_.require_same_shape(param, "rmsprop_step (state)");
    auto       p = param.data();
    auto const g = grad.data();
    auto       a = acc_.data();
    for (std::size_t i = 0; i < p.size(); ++i)
    {
      a[i] = cfg_.decay * a[i] + (1.0 - cfg_.decay) * g[i] * g[i];
      p[i] -= cfg_.learning_rate * g[i] / std::sqrt(a[i] + cfg_.epsilon);
    }
  }

private:
  RmsPropConfig cfg_;
  Matrix        acc_;
};

inline Matrix rmsprop_step(RmsPropState &state, Matrix param, Matrix const &grad)
{
  state.apply(param, grad);
  return param;
}

inline void clip_weights_inplace(Matrix &param, double bound)
{
  if (!(bound > 0.0))
  {
    throw ValidationError("clip_weights: bound must be positive");
  }
  for (auto &v : param.data())
  {
    v = std::clamp(v, -bound, bound);
  }
}

inline Matrix clip_weights(Matrix param, double bound)
{
  clip_weights_inplace(param, bound);
  return param;
}

}  // namespace scgan
