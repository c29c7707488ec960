#pragma once

// Parallel sections of a flat subbundle.
//
// Given a subbundle W' with vanishing second fundamental form, extend an
// aligned frame (X_1..X_n) of W' by a frame of its orthogonal complement.  In
// this frame the connection form is block upper triangular with an n x n
// block phi, and phi is flat (d phi + phi ^ phi = 0) when the curvature
// vanishes on W'.  Integrating dA = -phi A with A(x0) = I then gives the
// parallel sections X = sum_j X_j A^j_i c^i.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "dflag/bundle.hpp"
#include "dflag/chart.hpp"
#include "dflag/flag.hpp"

namespace dflag {

struct AdaptedFrameOptions {
  // phi feeds an ODE whose result is compared pointwise against transport, so
  // one order above the default
  int fd_order = kDefaultFdOrder + 2;
  /// Largest tolerated |lower-left block| of the connection form.  Lattice
  /// differences of the frame limit how small it can get, so a node only
  /// fails when the block also exceeds noise_safety times the estimated
  /// discretisation error (order fd_order against fd_order - 2).
  double block_tolerance = 1e-8;
  double noise_safety = 10.0;
  bool check_block = true;
};

struct AdaptedFrame {
  explicit AdaptedFrame(Chart c) : chart(std::move(c)) {}

  Chart chart;
  std::size_t flat_rank = 0;   // n
  std::size_t fiber_rank = 0;  // N
  std::vector<Eigen::MatrixXd> frames;             // N x N orthogonal; first n columns span W'
  std::vector<std::vector<Eigen::MatrixXd>> form;  // [node][mu]: connection form in the frame
  std::vector<char> valid;
  double block_defect = 0.0;  // max |lower-left block| over valid nodes
  double block_noise = 0.0;   // max estimated discretisation error of that block
  double block_excess = 0.0;  // max of |block| / max(tolerance, safety * noise)

  Eigen::MatrixXd phi(std::size_t node, std::size_t mu) const {
    return form[node][mu].topLeftCorner(flat_rank, flat_rank);
  }
  Eigen::MatrixXd lower_left(std::size_t node, std::size_t mu) const {
    return form[node][mu].bottomLeftCorner(fiber_rank - flat_rank, flat_rank);
  }
  Eigen::MatrixXd flat_frame(std::size_t node) const { return frames[node].leftCols(flat_rank); }
};

/// Adapted frame for the subbundle `flat`, aligned from `origin`.  Throws
/// NumericalError when check_block is set and block_excess > 1.
AdaptedFrame adapted_frame(const Connection& conn, const SubbundleField& flat, std::size_t origin,
                           const AdaptedFrameOptions& options = {});

/// max |d phi + phi ^ phi| over coordinate pairs at a valid node; d phi by
/// lattice differences of phi.
double flatness_residual(const AdaptedFrame& adapted, std::size_t node, int fd_order = kDefaultFdOrder);

struct IntegrationOptions {
  std::size_t substeps = 4;            // RK4 steps per lattice cell
  std::vector<std::size_t> axis_order;  // empty: 0, 1, ..., m-1
  int interp_points = 8;               // per axis, for phi between lattice nodes
};

struct ParallelFrameField {
  explicit ParallelFrameField(Chart c) : chart(std::move(c)) {}

  Chart chart;
  Point base;
  std::vector<std::size_t> axis_order;
  std::vector<Eigen::MatrixXd> transfer;    // A per node (n x n)
  std::vector<Eigen::MatrixXd> flat_frame;  // X per node (N x n)
  Eigen::MatrixXd base_frame;               // X at the base point
  std::vector<char> valid;
};

/// Solves dA = -phi A, A(x0) = I by RK4 along axis-ordered polylines from x0
/// to every lattice node.
ParallelFrameField integrate_parallel_frame(const AdaptedFrame& adapted, std::span<const double> x0,
                                            const IntegrationOptions& options = {});

/// The parallel section through w at the base point, sampled on the lattice
/// (NaN on nodes the integration could not reach).  Throws NotInSubbundle when
/// w is farther than 1e-6 |w| from the subbundle fiber at the base point.
SectionField make_parallel_section(const ParallelFrameField& pf, const Eigen::VectorXd& w);

struct TransportOptions {
  double max_step = 0.0;               // 0: 1/16 of the smallest lattice spacing
  std::size_t steps_per_segment = 0;   // overrides max_step when nonzero
};

/// RK4 solution of dw/dt = -omega(gamma'(t)) w along the polyline.
Eigen::VectorXd parallel_transport(const Connection& conn, const std::vector<Point>& path,
                                   const Eigen::VectorXd& w0, const TransportOptions& options = {});

/// Polyline from `from` to `to` moving along one axis at a time, in axis order.
std::vector<Point> axis_path(std::span<const double> from, std::span<const double> to,
                             const std::vector<std::size_t>& axis_order = {});

/// max over interior lattice nodes of |nabla s| (Frobenius norm of the N x m
/// matrix), lattice differences for grid-backed sections.  Nodes whose stencil
/// touches non-finite samples are skipped.
double parallelism_residual(const Connection& conn, const SectionField& s, int fd_order = kDefaultFdOrder);

}  // namespace dflag
