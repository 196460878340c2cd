#ifndef IPFIX_INSTANCE_HPP
#define IPFIX_INSTANCE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipfix {

using Index = Eigen::Index;
using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class Sense { Maximize, Minimize };
enum class Relation { LE, GE, EQ };

// Thrown when a structure violates its documented invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Quadratic objective term x^T A x. The symmetric flag is a promise
// (A == A^T entry-wise) that enables cheaper code paths downstream.
struct QuadraticTerm {
  SparseMat A;  // n x n
  bool symmetric = false;
};

// Uniform-relation linear constraint block: C x <rel> d, row-wise.
struct ConstraintBlock {
  Index m = 0;
  SparseMat C;  // m x n
  Eigen::VectorXd d;
  Relation relation = Relation::LE;
};

// A binary integer program over x in {0,1}^n:
//   optimise  x^T A x + b^T x + offset
//   subject to the optional constraint block.
// The offset carries constants accumulated when variables are eliminated,
// so reduced problems report objectives in the units of the original one.
struct IpInstance {
  Index n = 0;
  Sense sense = Sense::Maximize;
  Eigen::VectorXd b;
  std::optional<QuadraticTerm> quadratic;
  std::optional<ConstraintBlock> constraints;
  double offset = 0.0;

  void validate() const {
    if (n < 0) throw ValidationError("instance: n must be non-negative");
    if (b.size() != n) throw ValidationError("instance: b has wrong length");
    if (quadratic) {
      const SparseMat& A = quadratic->A;
      if (A.rows() != n || A.cols() != n)
        throw ValidationError("instance: A must be n x n");
      if (quadratic->symmetric && !is_symmetric(A))
        throw ValidationError("instance: A flagged symmetric but A != A^T");
    }
    if (constraints) {
      const ConstraintBlock& cb = *constraints;
      if (cb.m < 0) throw ValidationError("instance: m must be non-negative");
      if (cb.C.rows() != cb.m || cb.C.cols() != n)
        throw ValidationError("instance: C must be m x n");
      if (cb.d.size() != cb.m)
        throw ValidationError("instance: d has wrong length");
    }
  }

  static bool is_symmetric(const SparseMat& A) {
    SparseMat diff = SparseMat(A.transpose()) - A;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseMat::InnerIterator it(diff, k); it; ++it)
        if (it.value() != 0.0) return false;
    return true;
  }
};

// Objective value including the constant offset.
inline double evaluate(const IpInstance& inst, const Eigen::VectorXd& x) {
  double value = inst.b.dot(x) + inst.offset;
  if (inst.quadratic) value += x.dot(inst.quadratic->A * x);
  return value;
}

// Row-wise constraint satisfaction with an absolute tolerance that absorbs
// floating-point noise; binary x and exact data keep residuals near machine
// precision, so 1e-9 is far from both sides of any honest violation.
inline constexpr double kFeasTol = 1e-9;

inline bool row_satisfied(Relation rel, double lhs, double rhs,
                          double tol = kFeasTol) {
  switch (rel) {
    case Relation::LE: return lhs <= rhs + tol;
    case Relation::GE: return lhs >= rhs - tol;
    case Relation::EQ: return std::abs(lhs - rhs) <= tol;
  }
  return false;  // unreachable
}

// Indices of violated constraint rows (empty when unconstrained).
inline std::vector<Index> violated_rows(const IpInstance& inst,
                                        const Eigen::VectorXd& x,
                                        double tol = kFeasTol) {
  std::vector<Index> rows;
  if (!inst.constraints) return rows;
  const ConstraintBlock& cb = *inst.constraints;
  Eigen::VectorXd lhs = cb.C * x;
  for (Index i = 0; i < cb.m; ++i)
    if (!row_satisfied(cb.relation, lhs[i], cb.d[i], tol)) rows.push_back(i);
  return rows;
}

inline bool is_feasible(const IpInstance& inst, const Eigen::VectorXd& x,
                        double tol = kFeasTol) {
  return violated_rows(inst, x, tol).empty();
}

// Canonical triplet list (sorted by row then column, duplicates summed,
// explicit zeros dropped). Used for structural comparison and file output.
inline std::vector<Triplet> canonical_triplets(const SparseMat& A) {
  std::vector<Triplet> out;
  SparseMat pruned = A;
  pruned.prune([](Index, Index, double v) { return v != 0.0; });
  pruned.makeCompressed();
  for (int k = 0; k < pruned.outerSize(); ++k)
    for (SparseMat::InnerIterator it(pruned, k); it; ++it)
      out.emplace_back(it.row(), it.col(), it.value());
  std::sort(out.begin(), out.end(), [](const Triplet& a, const Triplet& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  return out;
}

inline bool same_matrix(const SparseMat& A, const SparseMat& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
  auto ta = canonical_triplets(A);
  auto tb = canonical_triplets(B);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].row() != tb[i].row() || ta[i].col() != tb[i].col() ||
        ta[i].value() != tb[i].value())
      return false;
  return true;
}

inline bool operator==(const IpInstance& a, const IpInstance& b) {
  if (a.n != b.n || a.sense != b.sense || a.offset != b.offset) return false;
  if (a.b.size() != b.b.size() || a.b != b.b) return false;
  if (a.quadratic.has_value() != b.quadratic.has_value()) return false;
  if (a.quadratic) {
    if (a.quadratic->symmetric != b.quadratic->symmetric) return false;
    if (!same_matrix(a.quadratic->A, b.quadratic->A)) return false;
  }
  if (a.constraints.has_value() != b.constraints.has_value()) return false;
  if (a.constraints) {
    if (a.constraints->m != b.constraints->m) return false;
    if (a.constraints->relation != b.constraints->relation) return false;
    if (a.constraints->d != b.constraints->d) return false;
    if (!same_matrix(a.constraints->C, b.constraints->C)) return false;
  }
  return true;
}

}  // namespace ipfix

#endif  // IPFIX_INSTANCE_HPP
