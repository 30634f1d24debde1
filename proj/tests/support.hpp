#ifndef SSW_TESTS_SUPPORT_HPP
#define SSW_TESTS_SUPPORT_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ssw/data_model.hpp"

namespace testing {

inline ssw::Observation obs(const std::string& cluster, int a, int y_star, int v, std::optional<int> y,
                            std::vector<double> x = {}) {
  ssw::Observation o;
  o.cluster_id = cluster;
  o.a = a;
  o.y_star = y_star;
  o.v = v;
  o.y = y;
  o.x = std::move(x);
  return o;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Saturated (1, Y, A, Y:A) coefficients reproducing p[y][a].
inline Eigen::VectorXd saturated_theta(double p00, double p10, double p01, double p11) {
  Eigen::VectorXd t(4);
  t << logit(p00), logit(p10) - logit(p00), logit(p01) - logit(p00),
      logit(p11) - logit(p01) - logit(p10) + logit(p00);
  return t;
}

/// Appends validated rows with the given Y* counts to `rows`, spread over `clusters` clusters.
inline void add_cell(std::vector<ssw::Observation>& rows, const std::vector<std::string>& clusters, int a, int y,
                     int n_pos, int n_neg) {
  std::size_t k = 0;
  for (int j = 0; j < n_pos + n_neg; ++j, ++k)
    rows.push_back(obs(clusters[k % clusters.size()], a, j < n_pos ? 1 : 0, 1, y));
}

}  // namespace testing

#endif
