#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dflag/expr.hpp"

namespace dflag {

using Point = std::vector<double>;
using GridIndex = std::vector<std::size_t>;

/// A coordinate box [lower, upper] sampled on a uniform lattice that includes
/// both endpoints.  Grid nodes are numbered row-major (last axis fastest).
class Chart {
 public:
  Chart(std::vector<std::string> coords, std::vector<double> lower, std::vector<double> upper,
        std::vector<std::size_t> counts);

  std::size_t dim() const noexcept { return coords_->size(); }
  const CoordList& coords() const noexcept { return coords_; }
  const std::string& coord_name(std::size_t mu) const { return (*coords_)[mu]; }

  double lower(std::size_t mu) const { return lower_[mu]; }
  double upper(std::size_t mu) const { return upper_[mu]; }
  std::size_t count(std::size_t mu) const { return counts_[mu]; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  double spacing(std::size_t mu) const { return (upper_[mu] - lower_[mu]) / double(counts_[mu] - 1); }

  std::size_t size() const noexcept { return size_; }
  std::size_t stride(std::size_t mu) const { return strides_[mu]; }

  GridIndex unravel(std::size_t node) const;
  std::size_t ravel(const GridIndex& index) const;
  std::size_t axis_index(std::size_t node, std::size_t mu) const { return node / strides_[mu] % counts_[mu]; }

  double coordinate(std::size_t mu, std::size_t i) const;
  Point point(std::size_t node) const;

  bool contains(std::span<const double> p) const;
  bool is_boundary(std::size_t node) const;
  /// Node nearest to p (p clamped into the box).
  std::size_t nearest_node(std::span<const double> p) const;

  /// All nodes whose index differs from `node` by at most one along every axis,
  /// including `node` itself.
  std::vector<std::size_t> neighborhood(std::size_t node) const;

  /// Same box with a different lattice resolution.
  Chart with_counts(std::vector<std::size_t> counts) const;

  bool operator==(const Chart& other) const;

 private:
  CoordList coords_;
  std::vector<double> lower_, upper_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace dflag
