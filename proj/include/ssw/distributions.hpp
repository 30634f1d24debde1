#ifndef SSW_DISTRIBUTIONS_HPP
#define SSW_DISTRIBUTIONS_HPP

#include <vector>

namespace ssw {

double normal_quantile(double p);
double student_t_quantile(double p, double df);

/// Empirical quantile by linear interpolation between order statistics
/// (position (n-1) q in the sorted sample).
double empirical_quantile(std::vector<double> sample, double q);

}  // namespace ssw

#endif  // SSW_DISTRIBUTIONS_HPP
