#ifndef IPFIX_ADMM_HPP
#define IPFIX_ADMM_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ipfix/instance.hpp"
#include "ipfix/prng.hpp"
#include "ipfix/projections.hpp"

namespace ipfix {

// Solver parameters. The defaults are tuned for the instance families in
// this toolkit; rho growth per iteration (mu) trades convergence speed
// against solution quality.
struct AdmmParams {
  double rho1 = 1e-2;      // box-copy penalty
  double rho2 = 1e-2;      // sphere-copy penalty
  double rho3 = 1e-2;      // constraint-copy penalty
  double mu = 1.01;        // per-iteration rho multiplier
  double rho_max = 1e3;    // rho ceiling
  double tol = 1e-4;       // residual infinity-norm threshold
  int max_iters = 20000;   // iteration budget
  double cg_tol = 1e-6;    // relative residual target of the inner CG solve
  int cg_max_iters = 200;  // inner CG iteration cap
  std::uint64_t seed = 0;  // seeds the random starting point

  void validate() const {
    if (rho1 <= 0.0 || rho2 <= 0.0 || rho3 <= 0.0)
      throw ValidationError("admm: penalties must be positive");
    if (mu < 1.0) throw ValidationError("admm: mu must be >= 1");
    if (rho_max < rho1 || rho_max < rho2 || rho_max < rho3)
      throw ValidationError("admm: rho_max below an initial penalty");
    if (tol <= 0.0) throw ValidationError("admm: tol must be positive");
    if (max_iters < 0) throw ValidationError("admm: max_iters must be >= 0");
    if (cg_tol <= 0.0 || cg_max_iters <= 0)
      throw ValidationError("admm: CG parameters must be positive");
  }
};

// Ring buffer of the most recent iterates, one column per tracked variable,
// plus whole-run flip statistics. A flip is an adjacent pair of iterate
// values strictly crossing 1/2.
class SolverTrace {
 public:
  SolverTrace(Index vars, int capacity)
      : capacity_(capacity), buf_(capacity, vars),
        flips_(Eigen::VectorXi::Zero(vars)), last_(vars) {
    if (capacity < 2)
      throw ValidationError("trace: capacity must be at least 2");
  }

  void append(const Eigen::VectorXd& x) {
    if (x.size() != buf_.cols())
      throw ValidationError("trace: appended vector has wrong length");
    if (count_ > 0)
      for (Index i = 0; i < x.size(); ++i)
        if ((last_[i] - 0.5) * (x[i] - 0.5) < 0.0) flips_[i] += 1;
    last_ = x;
    buf_.row(head_) = x.transpose();
    head_ = (head_ + 1) % capacity_;
    ++count_;
  }

  // Oldest-to-newest values of one variable over the last `capacity` steps.
  // Only meaningful once at least `capacity` iterates were appended.
  Eigen::VectorXd window(Index var) const {
    Eigen::VectorXd out(capacity_);
    for (int k = 0; k < capacity_; ++k)
      out[k] = buf_((head_ + k) % capacity_, var);
    return out;
  }

  // All windows stacked, one row per variable.
  Eigen::MatrixXd windows() const {
    Eigen::MatrixXd out(buf_.cols(), capacity_);
    for (Index v = 0; v < buf_.cols(); ++v) out.row(v) = window(v).transpose();
    return out;
  }

  // Drop all columns not listed in `keep` (ascending original positions).
  void shrink(const std::vector<Index>& keep) {
    const Index u = static_cast<Index>(keep.size());
    Eigen::MatrixXd buf(capacity_, u);
    Eigen::VectorXi flips(u);
    Eigen::VectorXd last(u);
    for (Index k = 0; k < u; ++k) {
      buf.col(k) = buf_.col(keep[static_cast<std::size_t>(k)]);
      flips[k] = flips_[keep[static_cast<std::size_t>(k)]];
      last[k] = last_[keep[static_cast<std::size_t>(k)]];
    }
    buf_.swap(buf);
    flips_.swap(flips);
    last_.swap(last);
  }

  int capacity() const { return capacity_; }
  long count() const { return count_; }
  Index vars() const { return buf_.cols(); }
  const Eigen::VectorXi& flips() const { return flips_; }

 private:
  int capacity_;
  Eigen::MatrixXd buf_;  // capacity x vars
  Eigen::VectorXi flips_;
  Eigen::VectorXd last_;
  int head_ = 0;    // next row to write
  long count_ = 0;  // total appends
};

// Mutable solver state. Besides the iterates it caches the pieces of the
// x-subproblem operator (sign, transposes) so each step avoids rebuilding
// them; rebind() refreshes the cache after the bound instance changes.
struct AdmmState {
  Eigen::VectorXd x, y1, y2, z1, z2;
  Eigen::VectorXd y3, z3;  // constraint copies; empty when unconstrained
  double rho1 = 0.0, rho2 = 0.0, rho3 = 0.0;
  long iter = 0;
  double box_residual = 0.0;
  double sphere_residual = 0.0;
  double cons_residual = 0.0;
  int cg_failures = 0;  // steps where the inner CG hit its iteration cap

  // cached operator pieces
  double sign = 1.0;  // +1 minimize, -1 maximize
  bool has_quad = false;
  bool quad_symmetric = false;
  bool has_cons = false;
  SparseMat At;  // A^T, only when has_quad and not symmetric
  SparseMat Ct;  // C^T, only when has_cons

  void rebind(const IpInstance& inst) {
    sign = inst.sense == Sense::Minimize ? 1.0 : -1.0;
    has_quad = inst.quadratic.has_value();
    quad_symmetric = has_quad && inst.quadratic->symmetric;
    has_cons = inst.constraints.has_value();
    if (has_quad && !quad_symmetric)
      At = inst.quadratic->A.transpose();
    else
      At.resize(0, 0);
    if (has_cons)
      Ct = inst.constraints->C.transpose();
    else
      Ct.resize(0, 0);
  }

  // Restrict the state to the variables listed in `keep` after the bound
  // instance was reduced. Constraint copies keep their row dimension.
  void shrink(const std::vector<Index>& keep, const IpInstance& reduced) {
    auto select = [&keep](const Eigen::VectorXd& v) {
      Eigen::VectorXd out(static_cast<Index>(keep.size()));
      for (Index k = 0; k < out.size(); ++k)
        out[k] = v[keep[static_cast<std::size_t>(k)]];
      return out;
    };
    x = select(x);
    y1 = select(y1);
    y2 = select(y2);
    z1 = select(z1);
    z2 = select(z2);
    rebind(reduced);
  }
};

namespace detail {

// y3 target set depends on the constraint relation: componentwise
// half-lines for inequalities, the point d for equalities.
inline Eigen::VectorXd project_relation(const Eigen::VectorXd& v,
                                        const Eigen::VectorXd& d,
                                        Relation rel) {
  switch (rel) {
    case Relation::LE: return v.cwiseMin(d);
    case Relation::GE: return v.cwiseMax(d);
    case Relation::EQ: return d;
  }
  return d;  // unreachable
}

// Applies the x-subproblem operator
//   (rho1 + rho2) I + rho3 C^T C + sign * (A + A^T).
struct XOperator {
  const AdmmState& state;
  const IpInstance& inst;

  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = (state.rho1 + state.rho2) * v;
    if (state.has_cons)
      out.noalias() += state.rho3 * (state.Ct * (inst.constraints->C * v));
    if (state.has_quad) {
      const SparseMat& A = inst.quadratic->A;
      if (state.quad_symmetric)
        out.noalias() += (2.0 * state.sign) * (A * v);
      else {
        out.noalias() += state.sign * (A * v);
        out.noalias() += state.sign * (state.At * v);
      }
    }
    return out;
  }
};

// Plain conjugate gradients on the matrix-free operator, warm-started at x.
// Returns false when the iteration cap was reached or the operator lost
// positive-definiteness; x then holds the last iterate.
template <typename Op>
inline bool conjugate_gradient(const Op& apply, const Eigen::VectorXd& rhs,
                               Eigen::VectorXd& x, double rel_tol,
                               int max_iters) {
  const double rhs_sq = rhs.squaredNorm();
  if (rhs_sq == 0.0) {
    x.setZero();
    return true;
  }
  const double threshold = rel_tol * rel_tol * rhs_sq;
  Eigen::VectorXd r = rhs - apply(x);
  double rs = r.squaredNorm();
  if (rs <= threshold) return true;
  Eigen::VectorXd p = r;
  for (int i = 0; i < max_iters; ++i) {
    Eigen::VectorXd ap = apply(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) return false;
    const double alpha = rs / curvature;
    x += alpha * p;
    r -= alpha * ap;
    const double rs_next = r.squaredNorm();
    if (rs_next <= threshold) return true;
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  return false;
}

}  // namespace detail

// Fresh state: x uniform in [0,1) from the seed, copies as projections of
// x, duals at zero, penalties at their initial values.
inline AdmmState init_state(const IpInstance& inst, const AdmmParams& params) {
  inst.validate();
  params.validate();
  AdmmState state;
  state.rebind(inst);
  Rng rng(params.seed);
  state.x.resize(inst.n);
  for (Index i = 0; i < inst.n; ++i) state.x[i] = rng.uniform();
  state.y1 = project_box(state.x);
  state.y2 = project_sphere(state.x);
  state.z1 = Eigen::VectorXd::Zero(inst.n);
  state.z2 = Eigen::VectorXd::Zero(inst.n);
  state.rho1 = params.rho1;
  state.rho2 = params.rho2;
  state.rho3 = params.rho3;
  if (inst.constraints) {
    const ConstraintBlock& cb = *inst.constraints;
    Eigen::VectorXd cx = cb.C * state.x;
    state.y3 = detail::project_relation(cx, cb.d, cb.relation);
    state.z3 = Eigen::VectorXd::Zero(cb.m);
    state.cons_residual = (cx - state.y3).lpNorm<Eigen::Infinity>();
  }
  state.box_residual = (state.x - state.y1).lpNorm<Eigen::Infinity>();
  state.sphere_residual = (state.x - state.y2).lpNorm<Eigen::Infinity>();
  return state;
}

// One ADMM iteration: refresh the copies, solve the x-subproblem by CG
// warm-started at the current x, ascend the duals, grow the penalties.
inline void admm_step(AdmmState& state, const IpInstance& inst,
                      const AdmmParams& params, SolverTrace* trace = nullptr) {
  if (state.x.size() != inst.n)
    throw ValidationError("admm_step: state does not match instance");

  state.y1 = project_box(state.x + state.z1 / state.rho1);
  state.y2 = project_sphere(state.x + state.z2 / state.rho2);
  if (state.has_cons) {
    const ConstraintBlock& cb = *inst.constraints;
    state.y3 = detail::project_relation(cb.C * state.x + state.z3 / state.rho3,
                                        cb.d, cb.relation);
  }

  Eigen::VectorXd rhs = state.rho1 * state.y1 - state.z1 +
                        state.rho2 * state.y2 - state.z2 -
                        state.sign * inst.b;
  if (state.has_cons)
    rhs.noalias() += state.Ct * (state.rho3 * state.y3 - state.z3);

  detail::XOperator op{state, inst};
  if (!detail::conjugate_gradient(op, rhs, state.x, params.cg_tol,
                                  params.cg_max_iters))
    ++state.cg_failures;

  state.z1 += state.rho1 * (state.x - state.y1);
  state.z2 += state.rho2 * (state.x - state.y2);
  state.box_residual = (state.x - state.y1).lpNorm<Eigen::Infinity>();
  state.sphere_residual = (state.x - state.y2).lpNorm<Eigen::Infinity>();
  if (state.has_cons) {
    Eigen::VectorXd cx = inst.constraints->C * state.x;
    state.z3 += state.rho3 * (cx - state.y3);
    state.cons_residual = (cx - state.y3).lpNorm<Eigen::Infinity>();
  }

  state.rho1 = std::min(state.rho1 * params.mu, params.rho_max);
  state.rho2 = std::min(state.rho2 * params.mu, params.rho_max);
  state.rho3 = std::min(state.rho3 * params.mu, params.rho_max);
  ++state.iter;
  if (trace) trace->append(state.x);
}

// All three splitting residuals below tol in the infinity norm.
inline bool converged(const AdmmState& state, double tol) {
  const double box = (state.x - state.y1).lpNorm<Eigen::Infinity>();
  const double sphere = (state.x - state.y2).lpNorm<Eigen::Infinity>();
  return std::max({box, sphere, state.cons_residual}) < tol;
}

// Called after every iteration with (iteration number, current iterate).
using IterObserver = std::function<void(long, const Eigen::VectorXd&)>;

struct Solution {
  Eigen::VectorXd x;  // binary assignment
  double objective = 0.0;
  long iterations = 0;
  bool converged = false;
  double wall_ms = 0.0;
  std::shared_ptr<SolverTrace> trace;  // present when requested
};

// Run the solver until convergence or the iteration budget, then round.
// The reported objective is re-evaluated on the rounded vector, which may
// violate constraints; callers decide how to treat infeasible roundings.
inline Solution solve(const IpInstance& inst, const AdmmParams& params,
                      const IterObserver& observer = {},
                      int trace_capacity = 0) {
  const auto start = std::chrono::steady_clock::now();
  AdmmState state = init_state(inst, params);
  std::shared_ptr<SolverTrace> trace;
  if (trace_capacity > 0)
    trace = std::make_shared<SolverTrace>(inst.n, trace_capacity);

  Solution sol;
  for (int t = 0; t < params.max_iters; ++t) {
    admm_step(state, inst, params, trace.get());
    if (observer) observer(state.iter, state.x);
    if (converged(state, params.tol)) {
      sol.converged = true;
      break;
    }
  }
  sol.x = binarize(state.x);
  sol.objective = evaluate(inst, sol.x);
  sol.iterations = state.iter;
  sol.trace = trace;
  sol.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return sol;
}

}  // namespace ipfix

#endif  // IPFIX_ADMM_HPP
