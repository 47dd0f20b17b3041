#ifndef SIMSIAM_OPTIMIZER_HPP
#define SIMSIAM_OPTIMIZER_HPP

#include <cmath>
#include <numbers>
#include <span>
#include <unordered_map>
#include <utility>

#include "simsiam/tape.hpp"

namespace simsiam {

enum class PredictorLrPolicy { cosine, constant };

struct OptimizerConfig {
  double base_lr = 0.05;
  long batch_size = 512;
  double momentum = 0.9;
  double weight_decay = 1e-4;  // applied to all parameters, BN scales/offsets included
  long epochs = 100;
  long warmup_epochs = -1;  // -1: auto (10 for batch sizes >= 1024, else 0)
  PredictorLrPolicy predictor_lr_policy = PredictorLrPolicy::cosine;

  double effective_lr() const {
    // Linear scaling: lr x BatchSize / 256.
    return base_lr * static_cast<double>(batch_size) / 256.0;
  }

  long resolved_warmup_epochs() const {
    if (warmup_epochs >= 0) return warmup_epochs;
    return batch_size >= 1024 ? 10 : 0;
  }

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

// Linear warmup from 0 to the effective lr, then half-cosine decay to 0.
inline double lr_at(long step, const OptimizerConfig& cfg, long total_steps) {
  if (step < 0 || step >= total_steps)
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + ")");
  const double eff = cfg.effective_lr();
  const long epochs = std::max<long>(1, cfg.epochs);
  const long warmup_steps = total_steps * cfg.resolved_warmup_epochs() / epochs;
  if (step < warmup_steps)
    return eff * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const long span = total_steps - warmup_steps;
  const double progress =
      span > 0 ? static_cast<double>(step - warmup_steps) / static_cast<double>(span) : 0.0;
  return eff * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

inline double predictor_lr_at(long step, const OptimizerConfig& cfg, long total_steps) {
  if (cfg.predictor_lr_policy == PredictorLrPolicy::constant) return cfg.effective_lr();
  return lr_at(step, cfg, total_steps);
}

// Momentum buffers plus the global step counter. Buffers are keyed by the
// parameter object, which outlives the per-step tapes.
template <typename Scalar>
struct SgdState {
  std::unordered_map<const Parameter<Scalar>*, Tensor<Scalar>> momentum_buf;
  long step = 0;
};

// One SGD update for a parameter group:
//   g <- grad + wd * param;  buf <- momentum * buf + g;  param <- param - lr * buf.
// Weight decay deliberately touches every parameter, including BN scale and
// offset. Does not advance the step counter (a trainer step may update
// several groups at different rates).
template <typename Scalar>
void sgd_step(std::span<const std::pair<Parameter<Scalar>*, const Tensor<Scalar>*>> group,
              SgdState<Scalar>& state, double lr, double momentum, double weight_decay) {
  for (auto& [param, grad] : group) {
    if (!param->trainable) continue;
    if (grad && !grad->same_shape(param->value))
      throw ShapeError("sgd_step: grad shape " + shape_str(grad->shape()) +
                       " != param shape " + shape_str(param->value.shape()) + " for " +
                       param->name);
    ArrayX<Scalar> g = grad ? ArrayX<Scalar>(grad->flat()) :
                              ArrayX<Scalar>(ArrayX<Scalar>::Zero(param->value.numel()));
    if (weight_decay != 0.0) g += static_cast<Scalar>(weight_decay) * param->value.flat();
    auto [it, fresh] = state.momentum_buf.try_emplace(param, Tensor<Scalar>::zeros(
                                                                 param->value.shape()));
    Tensor<Scalar>& buf = it->second;
    buf.flat() = static_cast<Scalar>(momentum) * buf.flat() + g;
    param->value.flat() -= static_cast<Scalar>(lr) * buf.flat();
  }
}

template <typename Scalar>
void sgd_step(const std::vector<std::pair<Parameter<Scalar>*, const Tensor<Scalar>*>>& group,
              SgdState<Scalar>& state, double lr, double momentum, double weight_decay) {
  sgd_step(std::span<const std::pair<Parameter<Scalar>*, const Tensor<Scalar>*>>(group), state, lr,
           momentum, weight_decay);
}

}  // namespace simsiam

#endif  // SIMSIAM_OPTIMIZER_HPP
