#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grin/tape.hpp"

namespace grin {

// Central differences (f(p+h) - f(p-h)) / 2h for every coordinate of every
// entry in params.
ParamMap finite_diff_grad(const std::function<double(const ParamMap&)>& f, const ParamMap& params,
                          double h);

// Worst agreement between an analytic gradient group and its probe:
// max |analytic - probe| scaled by the larger of the two infinity norms.
struct GroupCheck {
  std::string group;
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

// Exercises every tape primitive in isolation (plus one multi-consumer
// composite) on small shapes, probing every coordinate.
std::vector<GroupCheck> check_primitives(std::uint64_t seed, double h = 1e-5);

// Probes the full training loss at batch 2, 16x16: analytic backward()
// against central differences on a seeded coordinate sample per parameter
// group. The content target is held at its unperturbed value, matching the
// constant-target semantics of the recorded loss.
std::vector<GroupCheck> check_pipeline(std::uint64_t seed, bool freeze_grin_target,
                                       double h = 1e-5, int coords_per_group = 48);

}  // namespace grin
