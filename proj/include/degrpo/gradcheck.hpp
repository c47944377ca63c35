#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "degrpo/errors.hpp"
#include "degrpo/policy.hpp"

namespace degrpo {

struct GradReport {
  int coordinates_checked = 0;
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  double step_size = 0.0;
  bool passed = true;
};

// Central differences (f(x+h e_k) - f(x-h e_k)) / 2h of a deterministic
// objective evaluator over the requested coordinates. The evaluator must not
// resample anything; rollouts are frozen inputs. A non-finite evaluation
// yields NaN for that coordinate, which verify() skips.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const PolicyParams&)>& objective_fn,
    const PolicyParams& params, std::span<const int> coordinates, double h) {
  if (!(h > 0.0)) throw UsageError("finite_difference_gradient: h must be > 0");
  PolicyParams probe = params;
  std::vector<double> numeric;
  numeric.reserve(coordinates.size());
  for (int k : coordinates) {
    const double saved = probe.theta[static_cast<std::size_t>(k)];
    probe.theta[static_cast<std::size_t>(k)] = saved + h;
    const double above = objective_fn(probe);
    probe.theta[static_cast<std::size_t>(k)] = saved - h;
    const double below = objective_fn(probe);
    probe.theta[static_cast<std::size_t>(k)] = saved;
    if (!std::isfinite(above) || !std::isfinite(below)) {
      numeric.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    numeric.push_back((above - below) / (2.0 * h));
  }
  return numeric;
}

// Per-coordinate relative error |a-n| / max(|a|, |n|, abs_floor); reports the
// maximum and the worst coordinate. `coordinates` supplies the feature ids
// reported for the worst entry; pass the same list used for the differences.
inline GradReport verify(std::span<const double> analytic,
                         std::span<const double> numeric,
                         std::span<const int> coordinates, double rel_tol,
                         double abs_floor) {
  if (analytic.size() != numeric.size() ||
      coordinates.size() != numeric.size())
    throw UsageError("verify: dimension mismatch across checked coordinates");
  GradReport report;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    if (std::isnan(numeric[i])) continue;
    const double denom =
        std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), abs_floor});
    const double rel = std::fabs(analytic[i] - numeric[i]) / denom;
    report.coordinates_checked++;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = coordinates[i];
    }
  }
  report.passed = report.max_rel_error <= rel_tol;
  return report;
}

}  // namespace degrpo
