#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace mcrood::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is ~0 are compared absolutely.
  double abs_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Central-difference check of `analytic` against the scalar `f`, perturbing
/// `x` in place (each coordinate is restored bit-exactly afterwards). `x` may
/// alias state that `f` reads, e.g. model parameters.
GradCheckReport grad_check(const std::function<double()>& f, std::span<double> x,
                           std::span<const double> analytic, const GradCheckOptions& options = {});

}  // namespace mcrood::nn
