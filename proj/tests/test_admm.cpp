#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "ipfix/admm.hpp"
#include "ipfix/brute_force.hpp"
#include "ipfix/generators.hpp"

using namespace ipfix;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("box projection clamps and is idempotent") {
  Eigen::VectorXd v(3);
  v << -1.0, 0.5, 2.0;
  Eigen::VectorXd p = project_box(v);
  Eigen::VectorXd expected(3);
  expected << 0.0, 0.5, 1.0;
  REQUIRE(p.isApprox(expected));
  REQUIRE(project_box(p) == p);
}

TEST_CASE("sphere projection lands on the binary-corner sphere") {
  SECTION("hand-checked point in two dimensions") {
    Eigen::VectorXd v(2);
    v << 2.0, -1.0;
    Eigen::VectorXd p = project_sphere(v);
    REQUIRE(p[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(p[1] == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("residual vanishes for random inputs") {
    Rng rng(44);
    for (Index n : {2, 10, 100}) {
      const double radius = 0.5 * std::sqrt(static_cast<double>(n));
      for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd v(n);
        for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-3.0, 3.0);
        Eigen::VectorXd p = project_sphere(v);
        const double dist = (p.array() - 0.5).matrix().norm();
        REQUIRE(std::abs(dist - radius) < 1e-10 * std::sqrt(double(n)));
      }
    }
  }
  SECTION("centre input maps to a fixed representative") {
    Eigen::VectorXd centre = Eigen::VectorXd::Constant(4, 0.5);
    Eigen::VectorXd p = project_sphere(centre);
    REQUIRE(p[0] == Catch::Approx(0.5 + 1.0).margin(1e-12));  // radius 1 at n=4
    REQUIRE(p[1] == 0.5);
    REQUIRE(project_sphere(centre) == p);  // deterministic
  }
}

TEST_CASE("binarize rounds the midpoint up") {
  Eigen::VectorXd x(4);
  x << 0.49, 0.5, 0.51, 0.0;
  Eigen::VectorXd b = binarize(x);
  REQUIRE(b[0] == 0.0);
  REQUIRE(b[1] == 1.0);
  REQUIRE(b[2] == 1.0);
  REQUIRE(b[3] == 0.0);
}

TEST_CASE("unconstrained linear maximization saturates positive profits") {
  IpInstance inst;
  inst.n = 2;
  inst.sense = Sense::Maximize;
  inst.b.resize(2);
  inst.b << 1.0, 1.0;

  AdmmParams params;
  params.seed = 9;
  Solution sol = solve(inst, params);
  REQUIRE(sol.converged);
  REQUIRE(sol.x.isApprox(Eigen::VectorXd::Ones(2)));
  REQUIRE(sol.objective == Catch::Approx(2.0));
}

TEST_CASE("unconstrained linear minimization matches the sign pattern") {
  IpInstance inst;
  inst.n = 6;
  inst.sense = Sense::Minimize;
  inst.b.resize(6);
  inst.b << -2.0, 1.5, -0.7, 3.0, -1.1, 0.4;

  AdmmParams params;
  params.seed = 12;
  Solution sol = solve(inst, params);
  REQUIRE(sol.converged);
  for (Index i = 0; i < inst.n; ++i)
    REQUIRE(sol.x[i] == (inst.b[i] < 0.0 ? 1.0 : 0.0));
}

TEST_CASE("zero iteration budget returns the rounded starting point") {
  IpInstance inst;
  inst.n = 5;
  inst.b = Eigen::VectorXd::Ones(5);

  AdmmParams params;
  params.max_iters = 0;
  params.seed = 3;
  Solution sol = solve(inst, params);
  REQUIRE(sol.iterations == 0);
  REQUIRE_FALSE(sol.converged);

  AdmmState state = init_state(inst, params);
  REQUIRE(sol.x == binarize(state.x));
}

TEST_CASE("solves are deterministic for a fixed seed") {
  GeneratorConfig cfg;
  cfg.n = 40;
  cfg.items = 12;
  cfg.density = 0.2;
  cfg.seed = 77;
  IpInstance inst = generate_auction(cfg);

  AdmmParams params;
  params.seed = 5;
  Solution a = solve(inst, params);
  Solution b = solve(inst, params);
  REQUIRE(a.x == b.x);
  REQUIRE(a.iterations == b.iterations);
  REQUIRE(a.objective == b.objective);
}

TEST_CASE("observer sees every iteration in order") {
  IpInstance inst;
  inst.n = 3;
  inst.b.resize(3);
  inst.b << 0.5, -0.5, 1.0;

  AdmmParams params;
  params.max_iters = 50;
  long calls = 0;
  Solution sol = solve(inst, params, [&](long t, const Eigen::VectorXd& x) {
    ++calls;
    REQUIRE(t == calls);
    REQUIRE(x.size() == 3);
  });
  REQUIRE(calls == sol.iterations);
}

TEST_CASE("convergence predicate checks all splitting residuals") {
  AdmmState state;
  state.x = Eigen::VectorXd::Constant(4, 0.25);
  state.y1 = state.x;
  state.y2 = state.x;
  REQUIRE(converged(state, 1e-4));

  state.y1[2] += 1.0;
  REQUIRE_FALSE(converged(state, 1e-4));

  state.y1 = state.x;
  state.cons_residual = 0.5;
  REQUIRE_FALSE(converged(state, 1e-4));
}

TEST_CASE("trace keeps the most recent window in iteration order") {
  SolverTrace trace(2, 3);
  for (int t = 1; t <= 5; ++t)
    trace.append(Eigen::VectorXd::Constant(2, static_cast<double>(t)));
  Eigen::VectorXd w = trace.window(0);
  REQUIRE(w[0] == 3.0);
  REQUIRE(w[1] == 4.0);
  REQUIRE(w[2] == 5.0);
  REQUIRE(trace.count() == 5);
  REQUIRE(trace.windows().rows() == 2);
}

TEST_CASE("trace counts strict midpoint crossings only") {
  SolverTrace trace(2, 4);
  Eigen::VectorXd v(2);
  // var 0 crosses twice; var 1 touches 0.5 without crossing
  v << 0.4, 0.5;
  trace.append(v);
  v << 0.6, 0.5;
  trace.append(v);
  v << 0.4, 0.6;
  trace.append(v);
  REQUIRE(trace.flips()[0] == 2);
  REQUIRE(trace.flips()[1] == 0);
}

TEST_CASE("trace shrink keeps the selected columns") {
  SolverTrace trace(3, 2);
  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 3.0;
  trace.append(v);
  v << 4.0, 5.0, 6.0;
  trace.append(v);
  trace.shrink({0, 2});
  REQUIRE(trace.vars() == 2);
  Eigen::VectorXd w = trace.window(1);
  REQUIRE(w[0] == 3.0);
  REQUIRE(w[1] == 6.0);
}

TEST_CASE("small auctions solve close to the exhaustive optimum") {
  GeneratorConfig cfg;
  cfg.n = 12;
  cfg.items = 6;
  cfg.density = 0.35;

  int feasible = 0;
  double gap_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = 300 + seed;
    IpInstance inst = generate_auction(cfg);
    auto exact = brute_force_solve(inst);
    REQUIRE(exact.has_value());

    AdmmParams params;
    params.seed = seed;
    Solution sol = solve(inst, params);
    REQUIRE(sol.objective == evaluate(inst, sol.x));
    if (is_feasible(inst, sol.x)) {
      ++feasible;
      gap_sum += (exact->objective - sol.objective) / exact->objective;
    }
  }
  REQUIRE(feasible >= 8);
  REQUIRE(gap_sum / feasible <= 0.10);
}

TEST_CASE("grid labelling beats trivial assignments") {
  IpInstance inst = generate_grid_mrf(4, 3, 2.0, 0.5, 15);
  AdmmParams params;
  params.seed = 2;
  Solution sol = solve(inst, params);
  REQUIRE(sol.converged);

  auto exact = brute_force_solve(inst);
  REQUIRE(exact.has_value());
  IpInstance flipped = inst;
  flipped.sense = Sense::Maximize;
  auto worst = brute_force_solve(flipped);

  // Within 20% of the optimum on the full energy range.
  const double range = worst->objective - exact->objective;
  REQUIRE(sol.objective - exact->objective <= 0.2 * range);
}

TEST_CASE("splitting residuals trend downwards") {
  GeneratorConfig cfg;
  cfg.n = 100;
  cfg.items = 30;
  cfg.density = 0.1;
  cfg.seed = 500;
  IpInstance inst = generate_auction(cfg);

  AdmmParams params;
  params.seed = 1;
  AdmmState state = init_state(inst, params);
  std::vector<double> residuals;
  for (int t = 0; t < 600; ++t) {
    admm_step(state, inst, params);
    residuals.push_back(std::max({state.box_residual, state.sphere_residual,
                                  state.cons_residual}));
  }
  std::vector<double> early(residuals.begin(), residuals.begin() + 100);
  std::vector<double> late(residuals.end() - 100, residuals.end());
  REQUIRE(median(late) <= median(early));
}

TEST_CASE("solver parameters are validated") {
  AdmmParams params;
  params.mu = 0.5;
  IpInstance inst;
  inst.n = 1;
  inst.b = Eigen::VectorXd::Zero(1);
  REQUIRE_THROWS_AS(solve(inst, params), ValidationError);
}
