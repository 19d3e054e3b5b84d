#include "mcrood/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mcrood/error.hpp"

namespace mcrood::nn {

GradCheckReport grad_check(const std::function<double()>& f, std::span<double> x,
                           std::span<const double> analytic, const GradCheckOptions& options) {
  if (x.size() != analytic.size()) {
    throw ArgumentError("grad_check: gradient length differs from coordinate count");
  }
  if (!(options.epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be > 0");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + options.epsilon;
    const double up = f();
    x[i] = saved - options.epsilon;
    const double down = f();
    x[i] = saved;

    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), options.abs_floor});
    const double rel = abs_err / denom;
    if (!std::isfinite(rel) || rel > report.max_rel_error) {
      report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      report.worst_index = i;
    }
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    ++report.checked;
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace mcrood::nn
