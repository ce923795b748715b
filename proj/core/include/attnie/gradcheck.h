#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attnie/tensor.h"

namespace attnie {

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

// Backpropagates loss_fn() once, then compares every element of every leaf
// gradient with a central difference of step `step`. loss_fn must rebuild
// the graph from the current leaf values on each call. Returns the largest
// relative error.
double max_gradient_error(const std::function<Tensor()>& loss_fn,
                          const std::vector<Tensor>& leaves, double step = 1e-5);

struct GradCheck {
  std::string name;
  std::size_t trials = 0;
  double max_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_error < tolerance; }
};

// Every differentiable operation on `trials` random small shapes each.
std::vector<GradCheck> op_gradient_suite(std::size_t trials, std::uint64_t seed,
                                         double tolerance = 1e-4);

// Whole 4mha-4cnn network (I=6, d=8, H=2, f=3, widths 1 and 3) with respect
// to its input and every parameter.
GradCheck network_gradient_check(std::uint64_t seed, double tolerance = 1e-3);

}  // namespace attnie
