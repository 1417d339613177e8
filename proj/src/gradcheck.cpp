#include "fednilm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fednilm/error.hpp"

namespace fednilm {

GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> point, std::span<const double> analytic,
                                  double epsilon, std::size_t max_coordinates,
                                  std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ParameterError("finite_diff_check epsilon must be positive");
  if (point.size() != analytic.size()) {
    throw StructuralError("finite_diff_check: point and analytic gradient differ in length");
  }
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coordinates != 0 && max_coordinates < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  std::vector<double> w(point.begin(), point.end());
  for (std::size_t i : coords) {
    const double saved = w[i];
    w[i] = saved + epsilon;
    const double plus = f(w);
    w[i] = saved - epsilon;
    const double minus = f(w);
    w[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      report.ok = false;
      report.failure = "non-finite function value at coordinate " + std::to_string(i);
      report.worst_coordinate = i;
      return report;
    }
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = i;
    }
    ++report.coordinates_checked;
  }
  return report;
}

}  // namespace fednilm
