// Central-difference verification of loss_and_grads, shared by the unit and
// acceptance suites. Parameters are randomized before checking so structural
// zeros (zero-product init) do not mask broken adjoints.
#ifndef SUPERLORA_TESTS_FD_CHECK_HPP
#define SUPERLORA_TESTS_FD_CHECK_HPP

#include <algorithm>
#include <cmath>

#include "superlora/rng.hpp"
#include "superlora/trainer.hpp"

namespace fd_check {

// max over trainable scalars of |fd - analytic| / max(|fd|, |analytic|, 1e-4),
// with central differences at eps = 1e-5
inline double max_relative_error(const superlora::SuperLoraConfig& config,
                                 const superlora::ToyModel& model,
                                 const superlora::Batch& batch, std::uint64_t seed) {
  using namespace superlora;
  AdapterState state = init_adapter(config, model.adaptation_manifest(), seed);
  std::vector<double> flat = state.flat_parameters();
  CounterRng rng(seed + 1);
  for (double& v : flat) v = 0.3 * rng.next_normal();
  state.set_flat_parameters(flat);

  const LossAndGrads lg = loss_and_grads(state, model, batch);
  const std::vector<double> analytic = lg.grads.flatten(state);
  if (analytic.size() != flat.size())
    throw std::logic_error("fd_check: gradient vector size mismatch");

  double worst = 0.0;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + eps;
    state.set_flat_parameters(flat);
    const double up = adapter_batch_loss(state, model, batch);
    flat[i] = saved - eps;
    state.set_flat_parameters(flat);
    const double down = adapter_batch_loss(state, model, batch);
    flat[i] = saved;
    state.set_flat_parameters(flat);
    const double fd = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace fd_check

#endif  // SUPERLORA_TESTS_FD_CHECK_HPP
