#pragma once

// Finite-difference and interpolation stencils on the chart lattice.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dflag/chart.hpp"

namespace dflag {

/// First-derivative weights (Fornberg) for samples at `nodes`, evaluated at x0.
std::vector<double> fornberg_weights(double x0, std::span<const double> nodes, int derivative = 1);

/// Lagrange basis values at x for the given nodes.
std::vector<double> lagrange_weights(double x, std::span<const double> nodes);

struct Stencil {
  std::vector<std::ptrdiff_t> offsets;  // in lattice steps, relative to the evaluation node
  std::vector<double> weights;          // already scaled by 1/h
  int order = 0;                        // formal accuracy order
};

/// First-derivative stencil at lattice index i, using only indices in the
/// contiguous run [lo, hi].  Central when the run allows it, shifted near the
/// ends of the run.  Accuracy order is `order` (even) or the best the run
/// supports; nullopt when the run has fewer than three points.
std::optional<Stencil> derivative_stencil(std::size_t i, std::size_t lo, std::size_t hi, int order,
                                          double h);

/// Contiguous run of indices along axis mu through `node` for which valid(node') holds.
template <class Valid>
std::pair<std::size_t, std::size_t> valid_run(const Chart& chart, std::size_t node, std::size_t mu,
                                              const Valid& valid) {
  std::size_t i = chart.axis_index(node, mu);
  std::size_t s = chart.stride(mu);
  std::size_t lo = i, hi = i;
  while (lo > 0 && valid(node - (i - lo + 1) * s)) --lo;
  while (hi + 1 < chart.count(mu) && valid(node + (hi + 1 - i) * s)) ++hi;
  return {lo, hi};
}

/// Partial derivative along mu of a lattice field sampled through value(node).
/// Returns nullopt when the valid run through node is too short.
template <class Value, class Valid>
auto grid_derivative(const Chart& chart, std::size_t node, std::size_t mu, int order,
                     const Value& value, const Valid& valid)
    -> std::optional<std::decay_t<decltype(value(node))>> {
  using T = std::decay_t<decltype(value(node))>;
  auto [lo, hi] = valid_run(chart, node, mu, valid);
  auto st = derivative_stencil(chart.axis_index(node, mu), lo, hi, order, chart.spacing(mu));
  if (!st) return std::nullopt;
  const auto s = static_cast<std::ptrdiff_t>(chart.stride(mu));
  T acc = st->weights[0] * value(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + st->offsets[0] * s));
  for (std::size_t k = 1; k < st->offsets.size(); ++k)
    acc += st->weights[k] * value(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + st->offsets[k] * s));
  return acc;
}

/// Tensor-product Lagrange interpolation weights at an arbitrary point in the
/// chart box: pairs (node, weight).  Uses `points` lattice nodes per axis.
std::vector<std::pair<std::size_t, double>> interpolation_weights(const Chart& chart,
                                                                  std::span<const double> p,
                                                                  int points);

}  // namespace dflag
