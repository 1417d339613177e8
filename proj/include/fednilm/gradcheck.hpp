#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fednilm {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_coordinate = 0;
  bool ok = true;        // false when f produced a non-finite value
  std::string failure;
};

/// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

/// Central-difference check of `analytic` against f at `point`. When
/// max_coordinates is nonzero and smaller than the dimension, a seeded random
/// subset of that many coordinates is checked.
GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> point, std::span<const double> analytic,
                                  double epsilon = 1e-5, std::size_t max_coordinates = 0,
                                  std::uint64_t seed = 0);

}  // namespace fednilm
