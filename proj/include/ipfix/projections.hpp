#ifndef IPFIX_PROJECTIONS_HPP
#define IPFIX_PROJECTIONS_HPP

#include <Eigen/Dense>
#include <cmath>

namespace ipfix {

// Euclidean projection onto the unit box [0, 1]^n.
inline Eigen::VectorXd project_box(const Eigen::VectorXd& v) {
  return v.cwiseMax(0.0).cwiseMin(1.0);
}

// Euclidean projection onto the sphere centred at (1/2) 1 with radius
// sqrt(n)/2: the surface through all binary vectors. The degenerate input
// v == centre has no nearest point; we return centre + radius * e_0, a
// fixed representative, so callers stay deterministic.
inline Eigen::VectorXd project_sphere(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  const double radius = 0.5 * std::sqrt(static_cast<double>(n));
  Eigen::VectorXd shifted = v.array() - 0.5;
  const double norm = shifted.norm();
  if (norm == 0.0) {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, 0.5);
    out[0] += radius;
    return out;
  }
  return (shifted * (radius / norm)).array() + 0.5;
}

// Round to {0, 1}; the midpoint 0.5 rounds up.
inline Eigen::VectorXd binarize(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace ipfix

#endif  // IPFIX_PROJECTIONS_HPP
