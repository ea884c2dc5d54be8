#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gma/tensor.hpp"

namespace gma {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_autodiff = 0.0;
  double worst_central = 0.0;
  bool finite = true;  // false if any probe produced a non-finite loss
};

// Compares reverse-mode gradients against central differences
// (f(x+h) - f(x-h)) / 2h, taken entry by entry over every listed parameter.
// Relative error per entry is |autodiff - central| / (|central| + eps); the
// result carries the max. f must rebuild its graph from the live parameter
// values on each call.
GradCheckResult grad_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double h = 1e-5, double eps = 1e-8);

}  // namespace gma
