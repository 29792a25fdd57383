#pragma once

// Central finite-difference checks of reverse-mode gradients with respect
// to every network parameter.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reldepth/maps.hpp"
#include "reldepth/model.hpp"

namespace reldepth {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Error is |analytic - numeric| / max(floor, |numeric|): relative for
  // large gradients, absolute below the floor.
  double denominator_floor = 1e-3;
  // A stencil whose ends take a different relu/abs branch than the centre
  // straddles a kink, where differences do not estimate the derivative.
  // It is retried with the step divided by step_shrink, up to max_shrinks
  // times; parameters still straddling are reported as sitting on a kink.
  double step_shrink = 10.0;
  int max_shrinks = 4;
};

struct GradcheckReport {
  std::string name;
  std::size_t n_params = 0;
  double max_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t n_reduced_step = 0;
  std::size_t n_at_kink = 0;
  bool passed = false;
};

double gradcheck_error(double analytic, double numeric, double floor);

using ParameterLoss = std::function<Tensor(const DepthNet&)>;

// Backpropagates loss(net) once, then perturbs each parameter by +-step.
// Passes when the largest error is below tolerance and no parameter sits on
// a kink.
GradcheckReport gradcheck(DepthNet net, const ParameterLoss& loss, const GradcheckOptions& opts = {},
                          std::string name = {});

// A network at a generic point for gradient checks: unit final-layer gain
// and biases drawn from U(-0.1, 0.1), so no pre-activation is pinned at a
// relu kink by zero-valued inputs.
DepthNet gradcheck_network(std::uint64_t seed);

// The supervised, augmentation-consistency and temporal-consistency losses
// of gradcheck_network(seed) (teacher: an independent draw) on rendered
// oracle inputs of the given size. Teacher targets are computed once; they
// do not depend on the student's parameters.
std::vector<GradcheckReport> gradcheck_losses(std::uint64_t seed, Size2 size = {8, 8},
                                              const GradcheckOptions& opts = {});

}  // namespace reldepth
