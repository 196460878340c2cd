#ifndef IPFIX_GENERATORS_HPP
#define IPFIX_GENERATORS_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "ipfix/instance.hpp"
#include "ipfix/prng.hpp"

namespace ipfix {

// Parameters of the combinatorial-auction (set packing) family.
//   n            number of bids (variables)
//   items        nominal item pool size
//   xi           pool scale; the effective pool is max(1, round(xi * items))
//   density      probability that a bid requests a given item
//   price_scale  multiplies all bid prices
struct GeneratorConfig {
  Index n = 500;
  Index items = 100;
  double xi = 1.0;
  double density = 0.05;
  double price_scale = 1.0;
  std::uint64_t seed = 0;
};

// Combinatorial auction with single-unit items:
//   maximise  b^T x   subject to  C x <= 1,
// where column j of C marks the items requested by bid j. Bids price at
// price_scale * |bundle| * (1 + U(0, 0.5)), so larger bundles are worth
// more but compete for more items. Items never requested by any bid are
// dropped, so m is the number of referenced items.
//
// Draw order per bid: one uniform per pool item (inclusion test), one pool
// index if the bundle came out empty, then one uniform for the price.
inline IpInstance generate_auction(const GeneratorConfig& cfg) {
  if (cfg.n <= 0) throw ValidationError("auction: n must be positive");
  if (cfg.items <= 0) throw ValidationError("auction: items must be positive");
  if (cfg.density < 0.0 || cfg.density > 1.0)
    throw ValidationError("auction: density must lie in [0, 1]");
  const Index pool =
      std::max<Index>(1, static_cast<Index>(std::llround(cfg.xi * static_cast<double>(cfg.items))));

  Rng rng(cfg.seed);
  Eigen::VectorXd prices(cfg.n);
  std::vector<std::vector<Index>> bundles(static_cast<std::size_t>(cfg.n));
  for (Index bid = 0; bid < cfg.n; ++bid) {
    auto& bundle = bundles[static_cast<std::size_t>(bid)];
    for (Index item = 0; item < pool; ++item)
      if (rng.uniform() < cfg.density) bundle.push_back(item);
    if (bundle.empty())
      bundle.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool))));
    const double size = static_cast<double>(bundle.size());
    prices[bid] = cfg.price_scale * size * (1.0 + rng.uniform(0.0, 0.5));
  }

  // Keep only referenced items, renumbered in ascending item order.
  std::vector<Index> row_of(static_cast<std::size_t>(pool), -1);
  for (const auto& bundle : bundles)
    for (Index item : bundle) row_of[static_cast<std::size_t>(item)] = 0;
  Index m = 0;
  for (auto& row : row_of)
    if (row == 0) row = m++;

  std::vector<Triplet> trips;
  for (Index bid = 0; bid < cfg.n; ++bid)
    for (Index item : bundles[static_cast<std::size_t>(bid)])
      trips.emplace_back(row_of[static_cast<std::size_t>(item)], bid, 1.0);

  IpInstance inst;
  inst.n = cfg.n;
  inst.sense = Sense::Maximize;
  inst.b = prices;
  ConstraintBlock cb;
  cb.m = m;
  cb.C.resize(m, cfg.n);
  cb.C.setFromTriplets(trips.begin(), trips.end());
  cb.d = Eigen::VectorXd::Ones(m);
  cb.relation = Relation::LE;
  inst.constraints = std::move(cb);
  inst.validate();
  return inst;
}

// Two-label pairwise MRF on a 4-neighbour grid:
//   minimise  x^T A x + b^T x,
// with A = coupling * (D - W) the graph Laplacian of the grid (symmetric
// positive semidefinite, so agreeing neighbours cost nothing) and
// b = unary_strength * (two-region pattern + Gaussian noise). Nodes in the
// left half prefer label 1 (negative unary cost), the right half label 0.
// Node ids are row-major: id = row * width + col. Draw order: one normal
// deviate per node, row-major.
inline IpInstance generate_grid_mrf(Index width, Index height,
                                    double unary_strength, double coupling,
                                    std::uint64_t seed) {
  if (width <= 0 || height <= 0)
    throw ValidationError("mrf: grid dimensions must be positive");
  if (coupling < 0.0)
    throw ValidationError("mrf: coupling must be non-negative");
  const Index n = width * height;

  std::vector<Triplet> trips;
  auto node = [width](Index row, Index col) { return row * width + col; };
  for (Index row = 0; row < height; ++row) {
    for (Index col = 0; col < width; ++col) {
      const Index i = node(row, col);
      if (col + 1 < width) {
        const Index j = node(row, col + 1);
        trips.emplace_back(i, i, coupling);
        trips.emplace_back(j, j, coupling);
        trips.emplace_back(i, j, -coupling);
        trips.emplace_back(j, i, -coupling);
      }
      if (row + 1 < height) {
        const Index j = node(row + 1, col);
        trips.emplace_back(i, i, coupling);
        trips.emplace_back(j, j, coupling);
        trips.emplace_back(i, j, -coupling);
        trips.emplace_back(j, i, -coupling);
      }
    }
  }

  Rng rng(seed);
  Eigen::VectorXd b(n);
  for (Index row = 0; row < height; ++row) {
    for (Index col = 0; col < width; ++col) {
      const double pattern = (2 * col < width) ? -1.0 : 1.0;
      b[node(row, col)] = unary_strength * (pattern + 0.5 * rng.normal());
    }
  }

  IpInstance inst;
  inst.n = n;
  inst.sense = Sense::Minimize;
  inst.b = b;
  QuadraticTerm quad;
  quad.A.resize(n, n);
  quad.A.setFromTriplets(trips.begin(), trips.end());
  quad.A.prune([](Index, Index, double v) { return v != 0.0; });
  quad.symmetric = true;
  inst.quadratic = std::move(quad);
  inst.validate();
  return inst;
}

}  // namespace ipfix

#endif  // IPFIX_GENERATORS_HPP
