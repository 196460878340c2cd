#ifndef IPFIX_REFORMULATE_HPP
#define IPFIX_REFORMULATE_HPP

#include <cstdint>
#include <vector>

#include "ipfix/instance.hpp"

namespace ipfix {

enum class VarStatus : std::uint8_t { Free, Fixed0, Fixed1 };

// Bookkeeping for a sequence of variable fixings. Fixing is monotone: a
// variable never returns to Free. `reduced_to_original` maps positions of
// the current reduced problem back to original variable indices.
struct FixMask {
  std::vector<VarStatus> status;          // per original variable
  std::vector<Index> reduced_to_original; // length = free count
  int round = 0;                          // fixing rounds applied so far

  static FixMask all_free(Index n) {
    FixMask mask;
    mask.status.assign(static_cast<std::size_t>(n), VarStatus::Free);
    mask.reduced_to_original.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      mask.reduced_to_original[static_cast<std::size_t>(i)] = i;
    return mask;
  }

  Index original_n() const { return static_cast<Index>(status.size()); }
  Index free_count() const {
    return static_cast<Index>(reduced_to_original.size());
  }
  Index fixed_count() const { return original_n() - free_count(); }
};

// A fixing decision addressed in the coordinates of the current reduced
// problem: variable `reduced_index` takes the binary value `value`.
struct FixDecision {
  Index reduced_index = 0;
  bool value = false;
};

// Eliminate the decided variables from a (possibly already reduced)
// instance. Writing x = (x1, x2) with x2 the newly fixed block, the
// surviving problem over x1 keeps the objective value of every completion:
//   x^T A x = x1^T A11 x1 + (A12 + A21^T) x2 . x1 + x2^T A22 x2
// so the reduced instance gets A' = A11, b' = b1 + (A12 + A21^T) x2 (or
// b1 + 2 A12 x2 when A is symmetric), offset' = offset + x2^T A22 x2 +
// b2 . x2, and the constraints keep all rows with C' = C1, d' = d - C2 x2.
//
// Returns the reduced instance together with the updated mask; `keep`
// receives the surviving positions of the input instance (ascending), which
// callers use to shrink any state vectors that ride along.
inline std::pair<IpInstance, FixMask> apply_fixing(
    const IpInstance& inst, const FixMask& mask,
    const std::vector<FixDecision>& decisions,
    std::vector<Index>* keep_out = nullptr) {
  const Index u = inst.n;
  if (mask.free_count() != u)
    throw ValidationError("apply_fixing: mask does not match instance size");

  std::vector<signed char> fixed_value(static_cast<std::size_t>(u), -1);
  for (const FixDecision& dec : decisions) {
    if (dec.reduced_index < 0 || dec.reduced_index >= u)
      throw ValidationError("apply_fixing: decision index out of range");
    auto& slot = fixed_value[static_cast<std::size_t>(dec.reduced_index)];
    if (slot != -1)
      throw ValidationError("apply_fixing: duplicate decision for a variable");
    slot = dec.value ? 1 : 0;
  }

  // Positions that survive, and the new coordinate of each old position.
  std::vector<Index> keep;
  std::vector<Index> new_of(static_cast<std::size_t>(u), -1);
  for (Index i = 0; i < u; ++i)
    if (fixed_value[static_cast<std::size_t>(i)] == -1) {
      new_of[static_cast<std::size_t>(i)] = static_cast<Index>(keep.size());
      keep.push_back(i);
    }
  const Index u_next = static_cast<Index>(keep.size());
  auto value_of = [&fixed_value](Index i) {
    return static_cast<double>(fixed_value[static_cast<std::size_t>(i)]);
  };

  IpInstance out;
  out.n = u_next;
  out.sense = inst.sense;
  out.offset = inst.offset;
  out.b.resize(u_next);
  for (Index k = 0; k < u_next; ++k)
    out.b[k] = inst.b[keep[static_cast<std::size_t>(k)]];
  for (Index i = 0; i < u; ++i)
    if (fixed_value[static_cast<std::size_t>(i)] != -1)
      out.offset += inst.b[i] * value_of(i);

  if (inst.quadratic) {
    const SparseMat& A = inst.quadratic->A;
    const bool symmetric = inst.quadratic->symmetric;
    std::vector<Triplet> trips;
    for (int outer = 0; outer < A.outerSize(); ++outer) {
      for (SparseMat::InnerIterator it(A, outer); it; ++it) {
        const Index i = it.row(), j = it.col();
        const bool i_free = fixed_value[static_cast<std::size_t>(i)] == -1;
        const bool j_free = fixed_value[static_cast<std::size_t>(j)] == -1;
        if (i_free && j_free) {
          trips.emplace_back(new_of[static_cast<std::size_t>(i)],
                             new_of[static_cast<std::size_t>(j)], it.value());
        } else if (i_free) {
          // cross block A12: contributes to b' at row i; doubled for
          // symmetric A, where it also stands in for the mirrored A21 entry
          const double scale = symmetric ? 2.0 : 1.0;
          out.b[new_of[static_cast<std::size_t>(i)]] +=
              scale * it.value() * value_of(j);
        } else if (j_free) {
          if (!symmetric)
            out.b[new_of[static_cast<std::size_t>(j)]] +=
                it.value() * value_of(i);
        } else {
          out.offset += it.value() * value_of(i) * value_of(j);
        }
      }
    }
    QuadraticTerm quad;
    quad.A.resize(u_next, u_next);
    quad.A.setFromTriplets(trips.begin(), trips.end());
    quad.symmetric = symmetric;
    out.quadratic = std::move(quad);
  }

  if (inst.constraints) {
    const ConstraintBlock& cb = *inst.constraints;
    ConstraintBlock next;
    next.m = cb.m;
    next.relation = cb.relation;
    next.d = cb.d;
    std::vector<Triplet> trips;
    for (int outer = 0; outer < cb.C.outerSize(); ++outer) {
      for (SparseMat::InnerIterator it(cb.C, outer); it; ++it) {
        const Index j = it.col();
        if (fixed_value[static_cast<std::size_t>(j)] == -1)
          trips.emplace_back(it.row(), new_of[static_cast<std::size_t>(j)],
                             it.value());
        else
          next.d[it.row()] -= it.value() * value_of(j);
      }
    }
    next.C.resize(cb.m, u_next);
    next.C.setFromTriplets(trips.begin(), trips.end());
    out.constraints = std::move(next);
  }

  FixMask next_mask = mask;
  for (Index i = 0; i < u; ++i)
    if (fixed_value[static_cast<std::size_t>(i)] != -1) {
      const Index orig = mask.reduced_to_original[static_cast<std::size_t>(i)];
      next_mask.status[static_cast<std::size_t>(orig)] =
          fixed_value[static_cast<std::size_t>(i)] == 1 ? VarStatus::Fixed1
                                                        : VarStatus::Fixed0;
    }
  next_mask.reduced_to_original.clear();
  for (Index k = 0; k < u_next; ++k)
    next_mask.reduced_to_original.push_back(
        mask.reduced_to_original[static_cast<std::size_t>(
            keep[static_cast<std::size_t>(k)])]);
  next_mask.round = mask.round + 1;

  if (keep_out) *keep_out = std::move(keep);
  return {std::move(out), std::move(next_mask)};
}

// Scatter a reduced-space vector back to original coordinates, filling the
// fixed positions with their assigned constants.
inline Eigen::VectorXd lift_solution(const Eigen::VectorXd& x_reduced,
                                     const FixMask& mask) {
  if (x_reduced.size() != mask.free_count())
    throw ValidationError("lift_solution: vector does not match mask");
  Eigen::VectorXd full(mask.original_n());
  for (Index i = 0; i < mask.original_n(); ++i)
    full[i] = mask.status[static_cast<std::size_t>(i)] == VarStatus::Fixed1
                  ? 1.0
                  : 0.0;
  for (Index k = 0; k < x_reduced.size(); ++k)
    full[mask.reduced_to_original[static_cast<std::size_t>(k)]] = x_reduced[k];
  return full;
}

}  // namespace ipfix

#endif  // IPFIX_REFORMULATE_HPP
