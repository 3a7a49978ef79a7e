#pragma once

#include <string_view>
#include <vector>

#include "fmn/attack.hpp"

namespace fmn {

struct RobustnessCurve {
  std::vector<double> epsilons;
  std::vector<double> accuracy;
};

/// Per-sample best norms; failed attacks map to +inf.
std::vector<double> result_norms(const std::vector<AttackResult>& results);

/// Lower median (element (n-1)/2 of the sorted norms). +inf for an empty list.
double median_norm(std::vector<double> norms);
double median_norm(const std::vector<AttackResult>& results);

/// Fraction of samples whose norm exceeds each epsilon. `eps_grid` must be
/// strictly increasing.
RobustnessCurve robust_accuracy(const std::vector<double>& norms, const std::vector<double>& eps_grid);
RobustnessCurve robust_accuracy(const std::vector<AttackResult>& results, const std::vector<double>& eps_grid);

/// Parses "0.5", "8/255" or "inf".
double parse_rational(std::string_view text);

/// Parses a grid spec "lo:hi:Npts" (N evenly spaced points, ends included),
/// or a comma-separated list of values. Bounds accept rational form.
std::vector<double> parse_grid(std::string_view spec);

}  // namespace fmn
