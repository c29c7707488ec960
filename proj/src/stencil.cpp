#include "dflag/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dflag/error.hpp"

namespace dflag {

std::vector<double> fornberg_weights(double x0, std::span<const double> nodes, int derivative) {
  const int n = static_cast<int>(nodes.size()) - 1;
  const int m = derivative;
  if (n < m) throw std::invalid_argument("fornberg_weights: not enough nodes");
  // c[j][k]: weight of node j for the k-th derivative.
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0;
    double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int j = 0; j <= n; ++j) w[j] = c[j][m];
  return w;
}

std::vector<double> lagrange_weights(double x, std::span<const double> nodes) {
  std::vector<double> w(nodes.size(), 1.0);
  for (std::size_t j = 0; j < nodes.size(); ++j)
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (k != j) w[j] *= (x - nodes[k]) / (nodes[j] - nodes[k]);
  return w;
}

std::optional<Stencil> derivative_stencil(std::size_t i, std::size_t lo, std::size_t hi, int order,
                                          double h) {
  const std::size_t run = hi - lo + 1;
  if (run < 3) return std::nullopt;
  int p = std::max(2, order - order % 2);
  p = std::min<int>(p, static_cast<int>(run) - 1);
  const std::size_t width = static_cast<std::size_t>(p) + 1;
  std::size_t start = i >= lo + static_cast<std::size_t>(p / 2) ? i - static_cast<std::size_t>(p / 2) : lo;
  start = std::min(start, hi + 1 - width);
  Stencil st;
  st.order = p;
  std::vector<double> nodes(width);
  for (std::size_t k = 0; k < width; ++k) {
    auto off = static_cast<std::ptrdiff_t>(start + k) - static_cast<std::ptrdiff_t>(i);
    st.offsets.push_back(off);
    nodes[k] = static_cast<double>(off);
  }
  st.weights = fornberg_weights(0.0, nodes, 1);
  for (double& w : st.weights) w /= h;
  return st;
}

std::vector<std::pair<std::size_t, double>> interpolation_weights(const Chart& chart,
                                                                  std::span<const double> p,
                                                                  int points) {
  if (!chart.contains(p)) throw std::out_of_range("interpolation point outside chart domain");
  std::vector<std::pair<std::size_t, double>> out{{0, 1.0}};
  for (std::size_t mu = 0; mu < chart.dim(); ++mu) {
    const std::size_t n = chart.count(mu);
    const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(std::max(points, 2)), n);
    double t = (p[mu] - chart.lower(mu)) / chart.spacing(mu);
    t = std::clamp(t, 0.0, double(n - 1));
    // Window [start, start + width) as centred on t as the lattice allows.
    double first = std::floor(t - 0.5 * double(width - 1) + 1e-9);
    std::size_t start = static_cast<std::size_t>(std::clamp(first, 0.0, double(n - width)));
    std::vector<double> nodes(width);
    for (std::size_t k = 0; k < width; ++k) nodes[k] = double(start + k);
    std::vector<double> w = lagrange_weights(t, nodes);
    std::vector<std::pair<std::size_t, double>> next;
    next.reserve(out.size() * width);
    for (auto [node, weight] : out)
      for (std::size_t k = 0; k < width; ++k)
        next.emplace_back(node + (start + k) * chart.stride(mu), weight * w[k]);
    out = std::move(next);
  }
  return out;
}

}  // namespace dflag
