#pragma once

#include <span>

namespace partshot {

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
};

/// Mean and 1.96 * s / sqrt(n), with s the sample (n - 1) standard deviation.
/// Needs at least two values.
MeanCi confidence_interval(std::span<const double> values);

}  // namespace partshot
