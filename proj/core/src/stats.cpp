#include "partshot/stats.hpp"

#include <cmath>

#include "partshot/errors.hpp"

namespace partshot {

MeanCi confidence_interval(std::span<const double> values) {
  if (values.size() < 2) throw Error("confidence interval needs at least two values");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

}  // namespace partshot
