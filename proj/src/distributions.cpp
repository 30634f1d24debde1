#include "ssw/distributions.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ssw/error.hpp"

namespace ssw {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("quantile probability must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("quantile probability must lie in (0, 1)");
  if (!(df > 0.0)) throw ArgumentError("t quantile needs positive degrees of freedom");
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double empirical_quantile(std::vector<double> sample, double q) {
  if (sample.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level must lie in [0, 1]");
  std::sort(sample.begin(), sample.end());
  const double pos = q * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sample[lo] + frac * (sample[hi] - sample[lo]);
}

}  // namespace ssw
