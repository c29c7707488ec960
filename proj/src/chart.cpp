#include "dflag/chart.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dflag/error.hpp"

namespace dflag {

Chart::Chart(std::vector<std::string> coords, std::vector<double> lower, std::vector<double> upper,
             std::vector<std::size_t> counts)
    : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)) {
  const std::size_t m = coords.size();
  if (m == 0) throw ShapeError("chart needs at least one coordinate");
  if (lower_.size() != m || upper_.size() != m || counts_.size() != m)
    throw ShapeError("chart: domain and grid must have one entry per coordinate");
  for (std::size_t mu = 0; mu < m; ++mu) {
    if (!(lower_[mu] < upper_[mu]))
      throw ShapeError("chart: empty domain for coordinate '" + coords[mu] + "'");
    if (counts_[mu] < 3)
      throw ShapeError("chart: coordinate '" + coords[mu] + "' needs at least 3 grid points");
  }
  // Validates names (reserved words, duplicates) through the parser's rules.
  coords_ = parse_scalar_field("0", coords).coords();
  strides_.assign(m, 1);
  for (std::size_t mu = m - 1; mu-- > 0;) strides_[mu] = strides_[mu + 1] * counts_[mu + 1];
  size_ = strides_[0] * counts_[0];
}

GridIndex Chart::unravel(std::size_t node) const {
  GridIndex idx(dim());
  for (std::size_t mu = 0; mu < dim(); ++mu) idx[mu] = axis_index(node, mu);
  return idx;
}

std::size_t Chart::ravel(const GridIndex& index) const {
  if (index.size() != dim()) throw ShapeError("grid index has wrong dimension");
  std::size_t node = 0;
  for (std::size_t mu = 0; mu < dim(); ++mu) {
    if (index[mu] >= counts_[mu]) throw std::out_of_range("grid index outside lattice");
    node += index[mu] * strides_[mu];
  }
  return node;
}

double Chart::coordinate(std::size_t mu, std::size_t i) const {
  if (i + 1 == counts_[mu]) return upper_[mu];
  return lower_[mu] + double(i) * spacing(mu);
}

Point Chart::point(std::size_t node) const {
  Point p(dim());
  for (std::size_t mu = 0; mu < dim(); ++mu) p[mu] = coordinate(mu, axis_index(node, mu));
  return p;
}

bool Chart::contains(std::span<const double> p) const {
  if (p.size() != dim()) return false;
  for (std::size_t mu = 0; mu < dim(); ++mu) {
    double slack = 1e-12 * (upper_[mu] - lower_[mu]);
    if (p[mu] < lower_[mu] - slack || p[mu] > upper_[mu] + slack) return false;
  }
  return true;
}

bool Chart::is_boundary(std::size_t node) const {
  for (std::size_t mu = 0; mu < dim(); ++mu) {
    std::size_t i = axis_index(node, mu);
    if (i == 0 || i + 1 == counts_[mu]) return true;
  }
  return false;
}

std::size_t Chart::nearest_node(std::span<const double> p) const {
  if (p.size() != dim()) throw ShapeError("point has wrong dimension");
  std::size_t node = 0;
  for (std::size_t mu = 0; mu < dim(); ++mu) {
    double t = std::round((p[mu] - lower_[mu]) / spacing(mu));
    t = std::clamp(t, 0.0, double(counts_[mu] - 1));
    node += static_cast<std::size_t>(t) * strides_[mu];
  }
  return node;
}

std::vector<std::size_t> Chart::neighborhood(std::size_t node) const {
  std::vector<std::size_t> out{node};
  for (std::size_t mu = 0; mu < dim(); ++mu) {
    std::size_t i = axis_index(node, mu);
    std::vector<std::size_t> next;
    for (std::size_t n : out) {
      if (i > 0) next.push_back(n - strides_[mu]);
      next.push_back(n);
      if (i + 1 < counts_[mu]) next.push_back(n + strides_[mu]);
    }
    out = std::move(next);
  }
  return out;
}

Chart Chart::with_counts(std::vector<std::size_t> counts) const {
  return Chart(*coords_, lower_, upper_, std::move(counts));
}

bool Chart::operator==(const Chart& other) const {
  return *coords_ == *other.coords_ && lower_ == other.lower_ && upper_ == other.upper_ &&
         counts_ == other.counts_;
}

}  // namespace dflag
