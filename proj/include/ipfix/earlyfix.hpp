#ifndef IPFIX_EARLYFIX_HPP
#define IPFIX_EARLYFIX_HPP

#include <chrono>
#include <cstdint>
#include <vector>

#include "ipfix/admm.hpp"
#include "ipfix/attention_net.hpp"
#include "ipfix/policy.hpp"
#include "ipfix/reformulate.hpp"

namespace ipfix {

enum class PolicyKind { None, Heuristic, Learned };

enum class Action : std::uint8_t { Stay, Fix0, Fix1 };

enum class Termination { Converged, AllFixed, Budget };

// Accelerated-run parameters. Every `beta` iterations the policy scores
// each free variable; scores above delta fix it to one, below 1 - delta to
// zero, and the problem is reduced accordingly. delta = 1 never fixes.
struct RunConfig {
  int beta = 100;
  double delta = 0.9;
  long t_prime = 20000;  // iteration budget
  PolicyKind policy = PolicyKind::Heuristic;
  const PolicyWeights<float>* model = nullptr;  // required for Learned

  void validate() const {
    if (beta < 2) throw ValidationError("run: beta must be at least 2");
    if (delta < 0.5 || delta > 1.0)
      throw ValidationError("run: delta must lie in [0.5, 1]");
    if (t_prime < 0) throw ValidationError("run: budget must be >= 0");
    if (policy == PolicyKind::Learned) {
      if (!model)
        throw ValidationError("run: learned policy requires a model");
      if (model->config.beta != beta)
        throw ValidationError("run: model was trained for a different beta");
    }
  }
};

// Strict double-sided threshold; boundary scores leave the variable free.
inline std::vector<Action> decide_actions(const Eigen::VectorXd& probs,
                                          double delta) {
  std::vector<Action> actions(static_cast<std::size_t>(probs.size()),
                              Action::Stay);
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > delta)
      actions[static_cast<std::size_t>(i)] = Action::Fix1;
    else if (probs[i] < 1.0 - delta)
      actions[static_cast<std::size_t>(i)] = Action::Fix0;
  }
  return actions;
}

struct RoundRecord {
  long iteration = 0;    // solver iteration at which the round ran
  Index fixed_to_one = 0;
  Index fixed_to_zero = 0;
  Index remaining = 0;   // free variables after the round
};

struct EpisodeLog {
  std::vector<double> objective_trace;  // continuous objective per iteration
  std::vector<RoundRecord> rounds;
  Termination termination = Termination::Budget;
  double solver_ms = 0.0;  // wall time minus policy evaluation and rebuilds
  double total_ms = 0.0;
};

struct RunResult {
  Solution solution;
  EpisodeLog log;
  FixMask mask;
};

// Solver loop with early fixing. The solution is reported in the original
// coordinates with the original objective; the per-iteration objective
// trace stays in original units across reductions because eliminated terms
// accumulate into the reduced instance's offset.
inline RunResult run(const IpInstance& inst, const RunConfig& cfg,
                     const AdmmParams& params,
                     const IterObserver& observer = {}) {
  inst.validate();
  cfg.validate();
  params.validate();
  const auto start = std::chrono::steady_clock::now();

  IpInstance work = inst;
  FixMask mask = FixMask::all_free(inst.n);
  AdmmState state = init_state(work, params);
  SolverTrace trace(inst.n, cfg.beta);

  RunResult result;
  EpisodeLog& log = result.log;
  log.termination = Termination::Budget;
  double policy_ms = 0.0;

  for (long t = 1; t <= cfg.t_prime; ++t) {
    admm_step(state, work, params, &trace);
    log.objective_trace.push_back(evaluate(work, state.x));
    if (observer) observer(state.iter, state.x);
    if (converged(state, params.tol)) {
      log.termination = Termination::Converged;
      break;
    }
    if (cfg.policy != PolicyKind::None && t % cfg.beta == 0 &&
        mask.free_count() > 0) {
      const auto policy_start = std::chrono::steady_clock::now();
      Eigen::MatrixXd windows = trace.windows();
      Eigen::VectorXd probs;
      if (cfg.policy == PolicyKind::Heuristic) {
        probs = heuristic_policy(windows);
      } else {
        DynMat<float> batch = windows.cast<float>();
        probs = policy_forward<float>(*cfg.model, batch, false)
                    .cast<double>();
      }

      std::vector<Action> actions = decide_actions(probs, cfg.delta);
      std::vector<FixDecision> decisions;
      RoundRecord record;
      record.iteration = t;
      for (Index i = 0; i < static_cast<Index>(actions.size()); ++i) {
        const Action a = actions[static_cast<std::size_t>(i)];
        if (a == Action::Stay) continue;
        decisions.push_back({i, a == Action::Fix1});
        if (a == Action::Fix1)
          ++record.fixed_to_one;
        else
          ++record.fixed_to_zero;
      }

      if (!decisions.empty()) {
        std::vector<Index> keep;
        auto [reduced, next_mask] = apply_fixing(work, mask, decisions, &keep);
        work = std::move(reduced);
        mask = std::move(next_mask);
        state.shrink(keep, work);
        trace.shrink(keep);
      }
      record.remaining = mask.free_count();
      log.rounds.push_back(record);
      policy_ms += std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - policy_start)
                       .count();
      if (mask.free_count() == 0) {
        log.termination = Termination::AllFixed;
        break;
      }
    }
  }

  result.solution.x = lift_solution(binarize(state.x), mask);
  result.solution.objective = evaluate(inst, result.solution.x);
  result.solution.iterations = state.iter;
  result.solution.converged = log.termination == Termination::Converged;
  result.solution.wall_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();
  log.total_ms = result.solution.wall_ms;
  log.solver_ms = log.total_ms - policy_ms;
  result.mask = std::move(mask);
  return result;
}

}  // namespace ipfix

#endif  // IPFIX_EARLYFIX_HPP
