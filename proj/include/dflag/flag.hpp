#pragma once

// Derived flag W ⊇ W(0) ⊇ W(1) ⊇ ... of a connection and its stable limit,
// the maximal flat subbundle.
//
//   V(0)   = common kernel of the curvature operators R(d_mu, d_nu)
//   W(i)   = V(i) restricted to the points where its rank is locally constant
//   V(i+1) = kernel of the second fundamental form of W(i)
//
// Everything is sampled on the chart lattice.  Points where the rank jumps are
// flagged irregular and excluded from later stages.

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dflag/bundle.hpp"
#include "dflag/chart.hpp"

namespace dflag {

/// Subspace of the N-dimensional fiber, held as an N x k orthonormal basis.
struct Subspace {
  Eigen::MatrixXd basis;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(basis.cols()); }
  std::size_t ambient() const noexcept { return static_cast<std::size_t>(basis.rows()); }
  Eigen::MatrixXd projector() const { return basis * basis.transpose(); }

  static Subspace full(std::size_t n) { return {Eigen::MatrixXd::Identity(n, n)}; }
  static Subspace zero(std::size_t n) { return {Eigen::MatrixXd(n, 0)}; }
  /// Orthonormal basis of the column span (columns below tol * largest are dropped).
  static Subspace span(const Eigen::MatrixXd& vectors, double tol = 1e-10);
};

/// Largest principal angle of `inner` against `outer` (0 when inner ⊆ outer).
double containment_angle(const Subspace& inner, const Subspace& outer);
/// Largest principal angle between two subspaces; pi/2 when ranks differ.
double max_principal_angle(const Subspace& a, const Subspace& b);
/// Euclidean distance from v to the subspace.
double distance_to(const Eigen::VectorXd& v, const Subspace& s);

/// Orthonormal basis of the common kernel of the matrices.  Singular values of
/// the stacked matrix at or below tau * max(sigma_max, reference_scale) count
/// as zero; reference_scale is the magnitude of whatever the matrices were
/// computed from, so round-off on a vanishing matrix is not mistaken for rank.
Subspace common_kernel(std::span<const Eigen::MatrixXd> mats, double tau, double reference_scale = 0.0);

/// A subspace per lattice node plus a regularity mask.
class SubbundleField {
 public:
  SubbundleField(Chart chart, std::vector<Subspace> fibers, std::vector<char> regular);

  const Chart& chart() const noexcept { return chart_; }
  std::size_t ambient() const noexcept { return ambient_; }
  const Subspace& fiber(std::size_t node) const { return fibers_.at(node); }
  bool is_regular(std::size_t node) const { return regular_.at(node) != 0; }
  const std::vector<char>& regular_mask() const noexcept { return regular_; }

  std::size_t regular_count() const;
  std::size_t max_rank() const;  // over regular nodes
  std::size_t min_rank() const;  // over regular nodes

  void mark_irregular(std::size_t node);

 private:
  Chart chart_;
  std::size_t ambient_;
  std::vector<Subspace> fibers_;
  std::vector<char> regular_;
};

/// Excludes every node whose rank exceeds the minimum rank over its 3^m
/// neighbourhood; on the remaining nodes the fibers are kept unchanged.
/// The result may have an empty regular set.
SubbundleField smooth_refine(const SubbundleField& v);

/// Per-node basis of a subbundle field, varying continuously across the lattice.
struct FrameField {
  Chart chart;
  std::vector<Eigen::MatrixXd> frames;  // N x k per node
  std::vector<char> valid;
  std::vector<std::size_t> failures;    // regular nodes where alignment failed
};

/// Transports a basis from `origin` across the regular set: each node takes its
/// parent's basis projected into the local fiber and re-orthonormalised (polar
/// factor).  Parents follow axis-ordered paths from the origin (first axis 0,
/// then axis 1, ...).  A projection whose largest principal angle reaches
/// pi/2 - 0.1 is an alignment failure.
FrameField gauge_align(const SubbundleField& v, std::size_t origin);

/// Second fundamental form of the subbundle spanned by `frames` at one node.
struct SecondFundamentalForm {
  Eigen::MatrixXd alpha;       // ((N-k) m) x k, blocks stacked over mu
  Eigen::MatrixXd error;       // estimated discretisation error of alpha
  double noise = 0;            // error magnitude used by sff_kernel; |error| unless raised
  Eigen::MatrixXd complement;  // N x (N-k) orthonormal complement basis
  double reference_scale = 0;  // magnitude of d X and omega X
};

/// Components of nabla_mu X_a projected onto the orthogonal complement of the
/// fiber, for each frame vector X_a.  Frame derivatives are lattice differences
/// of accuracy `fd_order` over valid neighbours.  Throws IrregularPoint when
/// the node is invalid or lacks a stencil.
SecondFundamentalForm second_fundamental_form(const Connection& conn, const FrameField& frames,
                                              std::size_t node, int fd_order = kDefaultFdOrder);

struct KernelSpectrum {
  double largest_discarded = 0.0;  // largest singular value declared zero
  double smallest_kept = 0.0;      // smallest singular value declared nonzero (0 if none)
};

/// Kernel of alpha inside the fiber, lifted back to N components.  Singular
/// values at or below max(tau * max(sigma_max, reference_scale),
/// noise_safety * noise) count as zero.  derived_flag raises noise to the
/// largest |error| over the node's neighbourhood, since the two-stencil
/// estimate can vanish at isolated nodes.
Subspace sff_kernel(const SecondFundamentalForm& sff, const Eigen::MatrixXd& frame, double tau,
                    double noise_safety = 10.0, KernelSpectrum* spectrum = nullptr);

struct FlagOptions {
  double tau_rank = 1e-8;
  double tau_stab = 1e-6;
  int fd_order = kDefaultFdOrder;
  double noise_safety = 10.0;
  std::optional<Point> origin;  // gauge alignment origin; default: lattice centre
};

struct StageDiagnostics {
  std::size_t stage = 0;
  std::size_t max_rank = 0;
  std::size_t min_rank = 0;
  std::size_t regular_points = 0;
  double largest_discarded = 0.0;
  double smallest_kept = 0.0;
  std::size_t alignment_failures = 0;
};

struct FlagReport {
  std::vector<std::size_t> ranks;      // max rank of W(0), W(1), ... over regular nodes
  std::size_t iterations = 0;          // number of second-fundamental-form steps
  bool converged = false;
  std::vector<SubbundleField> stages;  // W(0), W(1), ...
  std::vector<std::size_t> irregular;  // nodes outside the final regular mask
  std::vector<StageDiagnostics> diagnostics;
  FlagOptions options;

  const SubbundleField& flat() const { return stages.back(); }
  std::size_t rank_final() const { return ranks.back(); }
  double regular_fraction() const;
};

/// Runs the derived flag until two successive stages agree (equal rank and
/// largest principal angle below tau_stab at every regular node) or the rank
/// reaches zero; at most N+1 second-fundamental-form steps.
FlagReport derived_flag(const Connection& conn, const FlagOptions& options = {});

/// True iff the node and its whole 3^m neighbourhood are in the final regular mask.
bool is_regular(const FlagReport& report, std::size_t node);
/// Same for the lattice node nearest to p; throws std::out_of_range outside the chart.
bool is_regular(const FlagReport& report, std::span<const double> p);

/// Fiber at an arbitrary point by interpolating an aligned frame of the field.
Subspace fiber_at(const SubbundleField& field, std::span<const double> p, int interp_points = 8);

}  // namespace dflag
