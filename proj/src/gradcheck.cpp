#include "magcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace magcn {

double gradcheck_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), kGradcheckFloor});
  return std::fabs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const std::function<Tensor()>& loss,
                          std::span<const std::pair<std::string, Tensor>> params, double epsilon,
                          double tolerance) {
  GradcheckReport report;
  report.epsilon = epsilon;
  report.tolerance = tolerance;

  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  backward(loss());

  for (const auto& [name, p] : params) {
    Tensor t = p;
    GradcheckEntry entry;
    entry.name = name;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + epsilon;
      double up;
      double down;
      {
        NoGradGuard guard;
        up = loss().item();
        values[i] = original - epsilon;
        down = loss().item();
      }
      values[i] = original;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = gradcheck_relative_error(a, numeric);
      if (err > entry.max_rel_error || i == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, err);
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.passed = entry.max_rel_error <= tolerance;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradcheckReport gradcheck(const std::function<Tensor()>& loss, const ParamStore& params, double epsilon,
                          double tolerance) {
  return gradcheck(loss, std::span<const std::pair<std::string, Tensor>>(params.items()), epsilon, tolerance);
}

}  // namespace magcn
