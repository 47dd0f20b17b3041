#ifndef SIMSIAM_GRADCHECK_HPP
#define SIMSIAM_GRADCHECK_HPP

#include <algorithm>
#include <functional>
#include <vector>

#include "simsiam/ops.hpp"

namespace simsiam {

// Relative-error denominator floor; coordinates whose analytic and numeric
// gradients are both below this are compared absolutely against it.
inline constexpr double kGradCheckFloor = 1e-6;

using GraphBuilder =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Central finite-difference oracle for backward(). Rebuilds the graph per
// probe; stop-gradient outputs are captured on the base run and replayed on
// perturbed runs, so a blocked branch is numerically constant and the checker
// compares against the blocked semantics.
//
// Returns max over all input coordinates of
//   |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double grad_check(const GraphBuilder& build, const std::vector<Tensor<double>>& inputs,
                         double step) {
  if (step <= 0) throw std::invalid_argument("grad_check: step must be > 0");

  std::vector<Tensor<double>> sg_cache;
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    tape.capture_stopgrad(&sg_cache);
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const auto& in : inputs) vars.push_back(tape.leaf(in, /*requires_grad=*/true));
    Var<double> loss = build(tape, vars);
    GradStore<double> grads = tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(grads.at(v));
  }

  auto eval = [&](const std::vector<Tensor<double>>& probe) {
    Tape<double> tape;
    tape.replay_stopgrad(&sg_cache);
    std::vector<Var<double>> vars;
    vars.reserve(probe.size());
    for (const auto& in : probe) vars.push_back(tape.leaf(in));
    return build(tape, vars).value().value();
  };

  double worst = 0.0;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index j = 0; j < inputs[i].numel(); ++j) {
      const double x0 = inputs[i].flat()[j];
      probe[i].flat()[j] = x0 + step;
      const double fp = eval(probe);
      probe[i].flat()[j] = x0 - step;
      const double fm = eval(probe);
      probe[i].flat()[j] = x0;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i].flat()[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

inline double grad_check(const GraphBuilder& build, const std::vector<Tensor<double>>& inputs,
                         double step, double tolerance, bool* passed) {
  const double err = grad_check(build, inputs, step);
  if (passed) *passed = err < tolerance;
  return err;
}

}  // namespace simsiam

#endif  // SIMSIAM_GRADCHECK_HPP
