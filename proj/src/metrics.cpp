#include "fmn/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "fmn/errors.hpp"

namespace fmn {

std::vector<double> result_norms(const std::vector<AttackResult>& results) {
  std::vector<double> norms;
  norms.reserve(results.size());
  for (const auto& r : results) norms.push_back(r.success ? r.norm : std::numeric_limits<double>::infinity());
  return norms;
}

double median_norm(std::vector<double> norms) {
  if (norms.empty()) return std::numeric_limits<double>::infinity();
  const auto mid = norms.begin() + static_cast<std::ptrdiff_t>((norms.size() - 1) / 2);
  std::nth_element(norms.begin(), mid, norms.end());
  return *mid;
}

double median_norm(const std::vector<AttackResult>& results) { return median_norm(result_norms(results)); }

RobustnessCurve robust_accuracy(const std::vector<double>& norms, const std::vector<double>& eps_grid) {
  for (std::size_t i = 1; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > eps_grid[i - 1])) throw ContractError("epsilon grid must be strictly increasing");
  }
  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  RobustnessCurve curve;
  curve.epsilons = eps_grid;
  curve.accuracy.reserve(eps_grid.size());
  const double total = static_cast<double>(sorted.size());
  for (double eps : eps_grid) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), eps);
    curve.accuracy.push_back(sorted.empty() ? 0.0 : static_cast<double>(above) / total);
  }
  return curve;
}

RobustnessCurve robust_accuracy(const std::vector<AttackResult>& results, const std::vector<double>& eps_grid) {
  return robust_accuracy(result_norms(results), eps_grid);
}

namespace {

double parse_number(std::string_view text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [p, err] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (err != std::errc() || p != text.data() + text.size()) {
    throw ParseError(std::string(text), "not a number");
  }
  return v;
}

}  // namespace

double parse_rational(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_number(text);
  const double num = parse_number(text.substr(0, slash));
  const double den = parse_number(text.substr(slash + 1));
  if (den == 0.0) throw ParseError(std::string(text), "zero denominator");
  return num / den;
}

std::vector<double> parse_grid(std::string_view spec) {
  std::vector<double> grid;
  if (spec.find(':') != std::string_view::npos) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw ParseError(std::string(spec), "expected lo:hi:Npts");
    const double lo = parse_rational(spec.substr(0, c1));
    const double hi = parse_rational(spec.substr(c1 + 1, c2 - c1 - 1));
    auto count_text = spec.substr(c2 + 1);
    if (count_text.size() > 3 && count_text.substr(count_text.size() - 3) == "pts") {
      count_text.remove_suffix(3);
    }
    std::size_t n = 0;
    auto [p, err] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), n);
    if (err != std::errc() || p != count_text.data() + count_text.size() || n < 2) {
      throw ParseError(std::string(spec), "point count must be an integer >= 2");
    }
    if (!(hi > lo)) throw ParseError(std::string(spec), "grid upper bound must exceed lower bound");
    for (std::size_t i = 0; i < n; ++i) {
      grid.push_back(i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return grid;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto item = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    grid.push_back(parse_rational(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return grid;
}

}  // namespace fmn
