#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

struct GradcheckEntry {
  std::string name;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  double epsilon = 0.0;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  bool passed = true;
  std::vector<GradcheckEntry> entries;
};

/// Magnitudes below this are compared on an absolute scale: with eps=1e-5 a
/// central difference of an O(1) loss carries ~1e-11 of rounding noise, so
/// smaller gradients cannot be resolved relatively.
inline constexpr double kGradcheckFloor = 1e-6;

/// |a - n| / max(|a|, |n|, kGradcheckFloor)
double gradcheck_relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `loss` against central differences
/// for every entry of every listed parameter. `loss` must rebuild the graph
/// from the current parameter values on each call.
GradcheckReport gradcheck(const std::function<Tensor()>& loss,
                          std::span<const std::pair<std::string, Tensor>> params, double epsilon = 1e-5,
                          double tolerance = 1e-4);

GradcheckReport gradcheck(const std::function<Tensor()>& loss, const ParamStore& params, double epsilon = 1e-5,
                          double tolerance = 1e-4);

}  // namespace magcn
