#ifndef IPFIX_BENCH_HPP
#define IPFIX_BENCH_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ipfix/earlyfix.hpp"
#include "ipfix/instance.hpp"
#include "ipfix/solution_io.hpp"

namespace ipfix {

// Relative objective gap of a candidate objective obj2 against a reference
// obj1, oriented so that a positive gap always means lost solution quality.
inline double objective_gap(double obj1, double obj2, Sense sense) {
  if (obj1 == 0.0)
    throw ValidationError("objective_gap: reference objective is zero");
  return sense == Sense::Maximize ? (obj1 - obj2) / obj1
                                  : (obj2 - obj1) / obj1;
}

// Wall-time (or iteration-count) ratio of a reference run to a faster run.
inline double speedup(double t1, double t2) {
  if (t2 <= 0.0) throw ValidationError("speedup: divisor must be positive");
  return t1 / t2;
}

// Conventional display of a speedup ratio, truncated (not rounded) to one
// decimal place: 12.66... renders as "12.6".
inline std::string display_ratio(double ratio) {
  const double truncated = std::floor(ratio * 10.0) / 10.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", truncated);
  return buf;
}

// Number of positions where two binary vectors disagree.
inline long solution_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ValidationError("solution_diff: length mismatch");
  long diff = 0;
  for (Index i = 0; i < a.size(); ++i)
    if ((a[i] >= 0.5) != (b[i] >= 0.5)) ++diff;
  return diff;
}

// Solution accuracy in percent given the (possibly averaged) number of
// differing variables.
inline double accuracy_pct(Index n, double diff_count) {
  if (n <= 0) throw ValidationError("accuracy: n must be positive");
  return (static_cast<double>(n) - diff_count) / static_cast<double>(n) *
         100.0;
}

// Number of violated constraint rows of a binary assignment.
inline long count_infeasible(const IpInstance& inst, const Eigen::VectorXd& x) {
  return static_cast<long>(violated_rows(inst, x).size());
}

// Histogram of per-variable flip counts with fixed-width bins.
struct FlipHistogram {
  int bin_width = 5;
  std::vector<long> counts;  // bin k covers [k*w, (k+1)*w)
  long total_vars = 0;
  long zero_flip_vars = 0;

  double fraction(std::size_t bin) const {
    return total_vars == 0 ? 0.0
                           : static_cast<double>(counts[bin]) /
                                 static_cast<double>(total_vars);
  }
  double zero_flip_fraction() const {
    return total_vars == 0 ? 0.0
                           : static_cast<double>(zero_flip_vars) /
                                 static_cast<double>(total_vars);
  }
  // Index of the most populated bin (first one on ties).
  std::size_t modal_bin() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
      if (counts[k] > counts[best]) best = k;
    return best;
  }
};

inline FlipHistogram flip_histogram(const Eigen::VectorXi& flips,
                                    int bin_width = 5) {
  if (bin_width < 1)
    throw ValidationError("flip_histogram: bin width must be positive");
  FlipHistogram hist;
  hist.bin_width = bin_width;
  hist.total_vars = flips.size();
  const int max_flips = flips.size() == 0 ? 0 : flips.maxCoeff();
  hist.counts.assign(static_cast<std::size_t>(max_flips / bin_width) + 1, 0);
  for (Index i = 0; i < flips.size(); ++i) {
    ++hist.counts[static_cast<std::size_t>(flips[i] / bin_width)];
    if (flips[i] == 0) ++hist.zero_flip_vars;
  }
  return hist;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

inline std::string flip_histogram_csv(const FlipHistogram& hist) {
  std::string csv = "kind,bin_start,bin_end,count,fraction\n";
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    csv += "bin," + std::to_string(k * hist.bin_width) + "," +
           std::to_string((k + 1) * hist.bin_width) + "," +
           std::to_string(hist.counts[k]) + "," +
           detail::fmt_double(hist.fraction(k)) + "\n";
  }
  csv += "summary,zero_flips,," + std::to_string(hist.zero_flip_vars) + "," +
         detail::fmt_double(hist.zero_flip_fraction()) + "\n";
  csv += "summary,total_vars,," + std::to_string(hist.total_vars) + ",1\n";
  return csv;
}

// One benchmark table row: a solver configuration applied to one instance,
// measured against the plain baseline run with the same solver seed.
struct BenchRow {
  std::string instance;
  std::string mode;  // plain | heuristic | learned
  double delta = 0.0;
  bool has_delta = false;
  Index n = 0, m = 0;
  double objective = 0.0;
  double obj_gap = 0.0;
  long iterations = 0;
  double iter_speedup = 1.0;
  double time_s = 0.0;
  double time_speedup = 1.0;
  bool has_time_speedup = true;
  long sol_diff = 0;
  double accuracy = 100.0;
  long infeasible = 0;
  std::string termination;
  bool summary = false;
};

inline const std::string kBenchCsvHeader =
    "instance,mode,delta,n,m,objective,obj_gap,iterations,iter_speedup,"
    "time_s,time_speedup,sol_diff,accuracy_pct,infeasible,termination";

inline std::string bench_row_csv(const BenchRow& row) {
  using detail::fmt_double;
  std::string line = row.instance + "," + row.mode + ",";
  line += row.has_delta ? fmt_double(row.delta) : std::string();
  line += "," + std::to_string(row.n) + "," + std::to_string(row.m);
  line += "," + fmt_double(row.objective) + "," + fmt_double(row.obj_gap);
  line += "," + std::to_string(row.iterations) + "," +
          fmt_double(row.iter_speedup);
  line += "," + fmt_double(row.time_s) + ",";
  line += row.has_time_speedup ? fmt_double(row.time_speedup)
                               : std::string("na");
  line += "," + std::to_string(row.sol_diff) + "," + fmt_double(row.accuracy);
  line += "," + std::to_string(row.infeasible) + "," + row.termination;
  return line;
}

struct BenchConfig {
  std::vector<std::pair<std::string, IpInstance>> instances;  // name, data
  std::vector<std::string> modes = {"plain"};
  std::vector<double> deltas = {0.9};  // used by heuristic and learned modes
  int beta = 100;
  long t_prime = 20000;
  AdmmParams admm;
  const PolicyWeights<float>* model = nullptr;  // required for learned mode
  bool fixed_clock = false;  // report all wall times as zero
  bool collect_flips = false;

  void validate() const {
    if (instances.empty())
      throw ValidationError("bench: no instances given");
    if (modes.empty()) throw ValidationError("bench: no modes given");
    for (const std::string& mode : modes) {
      if (mode != "plain" && mode != "heuristic" && mode != "learned")
        throw ValidationError("bench: unknown mode '" + mode + "'");
      if (mode == "learned" && !model)
        throw ValidationError("bench: learned mode requires a model");
    }
    if (deltas.empty()) throw ValidationError("bench: no deltas given");
    for (double d : deltas)
      if (d < 0.5 || d > 1.0)
        throw ValidationError("bench: delta must lie in [0.5, 1]");
  }
};

struct BenchResult {
  std::vector<BenchRow> rows;          // per-run rows then summary rows
  FlipHistogram flips;                 // aggregated over plain runs
  std::string csv;                     // ready-to-write table
};

// Run every requested mode on every instance. The plain solve with the
// same instance and solver seed is the reference for gaps, speedups and
// solution differences; it is computed once per instance whether or not a
// plain row was requested. Iteration-count speedups are always reported;
// wall-time speedups are suppressed (na) under fixed_clock.
inline BenchResult run_bench(const BenchConfig& cfg) {
  cfg.validate();
  BenchResult result;
  Eigen::VectorXi all_flips;

  struct Key {
    std::string mode;
    double delta;
    bool has_delta;
  };
  std::vector<Key> keys;
  for (const std::string& mode : cfg.modes) {
    if (mode == "plain") {
      keys.push_back({mode, 0.0, false});
    } else {
      for (double d : cfg.deltas) keys.push_back({mode, d, true});
    }
  }
  std::vector<std::vector<BenchRow>> grouped(keys.size());

  for (const auto& [name, inst] : cfg.instances) {
    AdmmParams params = cfg.admm;
    const int trace_cap = cfg.collect_flips ? 2 : 0;
    Solution baseline = solve(inst, params, {}, trace_cap);
    if (cfg.collect_flips && baseline.trace) {
      const Eigen::VectorXi& f = baseline.trace->flips();
      const Index offset = all_flips.size();
      all_flips.conservativeResize(offset + f.size());
      all_flips.segment(offset, f.size()) = f;
    }

    for (std::size_t k = 0; k < keys.size(); ++k) {
      const Key& key = keys[k];
      BenchRow row;
      row.instance = name;
      row.mode = key.mode;
      row.delta = key.delta;
      row.has_delta = key.has_delta;
      row.n = inst.n;
      row.m = inst.constraints ? inst.constraints->m : 0;

      Solution sol;
      std::string termination;
      if (key.mode == "plain") {
        sol = baseline;
        termination = baseline.converged ? "converged" : "budget";
      } else {
        RunConfig run_cfg;
        run_cfg.beta = cfg.beta;
        run_cfg.delta = key.delta;
        run_cfg.t_prime = cfg.t_prime;
        run_cfg.policy = key.mode == "heuristic" ? PolicyKind::Heuristic
                                                 : PolicyKind::Learned;
        run_cfg.model = cfg.model;
        RunResult rr = run(inst, run_cfg, params);
        sol = rr.solution;
        termination = termination_name(rr.log.termination);
      }

      row.objective = sol.objective;
      row.obj_gap = objective_gap(baseline.objective, sol.objective,
                                  inst.sense);
      row.iterations = sol.iterations;
      row.iter_speedup = sol.iterations > 0
                             ? static_cast<double>(baseline.iterations) /
                                   static_cast<double>(sol.iterations)
                             : 0.0;
      row.time_s = cfg.fixed_clock ? 0.0 : sol.wall_ms / 1000.0;
      if (cfg.fixed_clock) {
        row.has_time_speedup = false;
      } else {
        row.time_speedup = sol.wall_ms > 0.0
                               ? baseline.wall_ms / sol.wall_ms
                               : 0.0;
      }
      row.sol_diff = solution_diff(baseline.x, sol.x);
      row.accuracy = accuracy_pct(inst.n, static_cast<double>(row.sol_diff));
      row.infeasible = count_infeasible(inst, sol.x);
      row.termination = termination;
      grouped[k].push_back(row);
      result.rows.push_back(std::move(row));
    }
  }

  // Mean summary per mode/delta group.
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& rows = grouped[k];
    BenchRow mean;
    mean.instance = "mean";
    mean.mode = keys[k].mode;
    mean.delta = keys[k].delta;
    mean.has_delta = keys[k].has_delta;
    mean.summary = true;
    mean.has_time_speedup = !cfg.fixed_clock;
    mean.iter_speedup = 0.0;
    mean.time_speedup = 0.0;
    mean.accuracy = 0.0;
    double iters = 0.0;
    for (const BenchRow& r : rows) {
      mean.n += r.n;
      mean.m += r.m;
      mean.objective += r.objective;
      mean.obj_gap += r.obj_gap;
      iters += static_cast<double>(r.iterations);
      mean.iter_speedup += r.iter_speedup;
      mean.time_s += r.time_s;
      mean.time_speedup += r.time_speedup;
      mean.sol_diff += r.sol_diff;
      mean.accuracy += r.accuracy;
      mean.infeasible += r.infeasible;
    }
    const double count = static_cast<double>(rows.size());
    mean.n = static_cast<Index>(mean.n / rows.size());
    mean.m = static_cast<Index>(mean.m / rows.size());
    mean.objective /= count;
    mean.obj_gap /= count;
    mean.iterations = static_cast<long>(iters / count);
    mean.iter_speedup /= count;
    mean.time_s /= count;
    mean.time_speedup = cfg.fixed_clock ? 0.0 : mean.time_speedup / count;
    mean.sol_diff = static_cast<long>(
        static_cast<double>(mean.sol_diff) / count);
    mean.accuracy /= count;
    mean.infeasible =
        static_cast<long>(static_cast<double>(mean.infeasible) / count);
    result.rows.push_back(mean);
  }

  if (cfg.collect_flips) result.flips = flip_histogram(all_flips);

  result.csv = kBenchCsvHeader + "\n";
  for (const BenchRow& row : result.rows) result.csv += bench_row_csv(row) + "\n";
  return result;
}

}  // namespace ipfix

#endif  // IPFIX_BENCH_HPP
