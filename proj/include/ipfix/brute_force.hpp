#ifndef IPFIX_BRUTE_FORCE_HPP
#define IPFIX_BRUTE_FORCE_HPP

#include <cstdint>
#include <optional>

#include "ipfix/instance.hpp"

namespace ipfix {

struct BruteForceResult {
  Eigen::VectorXd x;
  double objective = 0.0;
};

// Exhaustive reference optimum for small instances. Enumerates all 2^n
// assignments; refuses n > 24 to keep the cost bounded. Ties are broken
// towards the lexicographically smallest vector (x[0] is the most
// significant position). Returns nullopt when no assignment is feasible.
inline std::optional<BruteForceResult> brute_force_solve(
    const IpInstance& inst) {
  inst.validate();
  if (inst.n > 24)
    throw ValidationError("brute_force_solve: n > 24 is not supported");

  const Index n = inst.n;
  Eigen::MatrixXd A_dense;
  if (inst.quadratic) A_dense = Eigen::MatrixXd(inst.quadratic->A);
  Eigen::MatrixXd C_dense;
  if (inst.constraints) C_dense = Eigen::MatrixXd(inst.constraints->C);

  const bool maximize = inst.sense == Sense::Maximize;
  bool found = false;
  double best = 0.0;
  Eigen::VectorXd best_x;
  Eigen::VectorXd x(n);
  const std::uint64_t total = n >= 64 ? 0 : (std::uint64_t{1} << n);
  for (std::uint64_t k = 0; k < total; ++k) {
    // Bit n-1-i of k is x[i], so ascending k enumerates vectors in
    // lexicographic order and the first strict improvement wins ties.
    for (Index i = 0; i < n; ++i)
      x[i] = static_cast<double>((k >> (n - 1 - i)) & 1u);

    if (inst.constraints) {
      Eigen::VectorXd lhs = C_dense * x;
      bool ok = true;
      for (Index r = 0; r < inst.constraints->m && ok; ++r)
        ok = row_satisfied(inst.constraints->relation, lhs[r],
                           inst.constraints->d[r]);
      if (!ok) continue;
    }

    double value = inst.b.dot(x) + inst.offset;
    if (inst.quadratic) value += x.dot(A_dense * x);
    if (!found || (maximize ? value > best : value < best)) {
      found = true;
      best = value;
      best_x = x;
    }
  }

  if (!found) return std::nullopt;
  return BruteForceResult{best_x, best};
}

}  // namespace ipfix

#endif  // IPFIX_BRUTE_FORCE_HPP
