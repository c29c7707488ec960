#include "dflag/flag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dflag/error.hpp"
#include "dflag/stencil.hpp"

namespace dflag {

namespace {

std::string describe(const Point& p) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ')';
  return os.str();
}

// Polar factor of the parent basis projected into `basis`; nullopt when the
// projection loses rank.
std::optional<Eigen::MatrixXd> align_to(const Eigen::MatrixXd& parent, const Eigen::MatrixXd& basis) {
  if (basis.cols() == 0) return basis;
  if (parent.cols() != basis.cols()) return std::nullopt;
  Eigen::MatrixXd m = basis.transpose() * parent;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() <= std::sin(0.1)) return std::nullopt;
  return Eigen::MatrixXd(basis * (svd.matrixU() * svd.matrixV().transpose()));
}

}  // namespace

Subspace Subspace::span(const Eigen::MatrixXd& vectors, double tol) {
  const auto n = vectors.rows();
  if (vectors.cols() == 0) return {Eigen::MatrixXd(n, 0)};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vectors, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return {Eigen::MatrixXd(n, 0)};
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol * sv(0)) ++r;
  return {svd.matrixU().leftCols(r)};
}

double containment_angle(const Subspace& inner, const Subspace& outer) {
  if (inner.rank() == 0) return 0.0;
  if (outer.rank() == 0) return std::numbers::pi / 2;
  Eigen::MatrixXd residual = inner.basis - outer.basis * (outer.basis.transpose() * inner.basis);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

double max_principal_angle(const Subspace& a, const Subspace& b) {
  if (a.rank() != b.rank()) return std::numbers::pi / 2;
  return std::max(containment_angle(a, b), containment_angle(b, a));
}

double distance_to(const Eigen::VectorXd& v, const Subspace& s) {
  if (s.rank() == 0) return v.norm();
  return (v - s.basis * (s.basis.transpose() * v)).norm();
}

Subspace common_kernel(std::span<const Eigen::MatrixXd> mats, double tau, double reference_scale) {
  if (mats.empty()) throw ShapeError("common_kernel needs at least one matrix");
  const auto n = mats[0].cols();
  Eigen::Index rows = 0;
  for (const auto& m : mats) {
    if (m.cols() != n) throw ShapeError("common_kernel: matrices have different column counts");
    rows += m.rows();
  }
  Eigen::MatrixXd stacked(rows, n);
  Eigen::Index r = 0;
  for (const auto& m : mats) {
    stacked.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double cutoff = tau * std::max(smax, reference_scale);
  Eigen::Index nonzero = 0;
  while (nonzero < sv.size() && sv(nonzero) > cutoff) ++nonzero;
  return {svd.matrixV().rightCols(n - nonzero)};
}

SubbundleField::SubbundleField(Chart chart, std::vector<Subspace> fibers, std::vector<char> regular)
    : chart_(std::move(chart)), fibers_(std::move(fibers)), regular_(std::move(regular)) {
  if (fibers_.size() != chart_.size() || regular_.size() != chart_.size())
    throw ShapeError("subbundle field must have one fiber per lattice node");
  ambient_ = fibers_.empty() ? 0 : fibers_[0].ambient();
  for (std::size_t k = 0; k < fibers_.size(); ++k) {
    if (fibers_[k].ambient() != ambient_) throw ShapeError("subbundle fibers live in different ambient spaces");
    if (!regular_[k]) fibers_[k] = Subspace::zero(ambient_);
  }
}

std::size_t SubbundleField::regular_count() const {
  return static_cast<std::size_t>(std::count(regular_.begin(), regular_.end(), char(1)));
}

std::size_t SubbundleField::max_rank() const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < fibers_.size(); ++k)
    if (regular_[k]) r = std::max(r, fibers_[k].rank());
  return r;
}

std::size_t SubbundleField::min_rank() const {
  std::size_t r = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < fibers_.size(); ++k)
    if (regular_[k]) r = std::min(r, fibers_[k].rank());
  return r == std::numeric_limits<std::size_t>::max() ? 0 : r;
}

void SubbundleField::mark_irregular(std::size_t node) {
  regular_.at(node) = 0;
  fibers_[node] = Subspace::zero(ambient_);
}

SubbundleField smooth_refine(const SubbundleField& v) {
  const Chart& chart = v.chart();
  std::vector<Subspace> fibers(chart.size());
  std::vector<char> regular(chart.size(), 0);
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!v.is_regular(node)) continue;
    std::size_t own = v.fiber(node).rank();
    std::size_t lowest = own;
    for (std::size_t nb : chart.neighborhood(node))
      if (v.is_regular(nb)) lowest = std::min(lowest, v.fiber(nb).rank());
    if (own > lowest) continue;
    fibers[node] = v.fiber(node);
    regular[node] = 1;
  }
  for (auto& f : fibers)
    if (f.basis.rows() == 0) f = Subspace::zero(v.ambient());
  return SubbundleField(chart, std::move(fibers), std::move(regular));
}

FrameField gauge_align(const SubbundleField& v, std::size_t origin) {
  const Chart& chart = v.chart();
  const std::size_t n = v.ambient();
  FrameField out{chart, std::vector<Eigen::MatrixXd>(chart.size(), Eigen::MatrixXd(n, 0)),
                 std::vector<char>(chart.size(), 0), {}};
  std::vector<char> visited(chart.size(), 0);

  auto grow = [&](std::size_t root, Eigen::MatrixXd root_frame) {
    out.frames[root] = std::move(root_frame);
    out.valid[root] = 1;
    visited[root] = 1;
    std::vector<std::size_t> frontier{root};
    for (std::size_t axis = 0; axis < chart.dim(); ++axis) {
      std::vector<std::size_t> next;
      const std::size_t stride = chart.stride(axis);
      for (std::size_t start : frontier) {
        next.push_back(start);
        for (int dir : {+1, -1}) {
          std::size_t parent = start;
          for (;;) {
            std::size_t i = chart.axis_index(parent, axis);
            if (dir > 0 ? i + 1 >= chart.count(axis) : i == 0) break;
            std::size_t child = dir > 0 ? parent + stride : parent - stride;
            if (visited[child] || !v.is_regular(child)) break;
            visited[child] = 1;
            auto f = align_to(out.frames[parent], v.fiber(child).basis);
            if (!f) {
              out.failures.push_back(child);
              break;
            }
            out.frames[child] = std::move(*f);
            out.valid[child] = 1;
            next.push_back(child);
            parent = child;
          }
        }
      }
      frontier = std::move(next);
    }
  };

  if (origin >= chart.size()) throw std::out_of_range("gauge_align: origin outside lattice");
  if (!v.is_regular(origin)) {
    // Closest regular node in index distance.
    auto o = chart.unravel(origin);
    std::size_t best = chart.size();
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (std::size_t node = 0; node < chart.size(); ++node) {
      if (!v.is_regular(node)) continue;
      auto idx = chart.unravel(node);
      std::size_t d = 0;
      for (std::size_t mu = 0; mu < idx.size(); ++mu) d += idx[mu] > o[mu] ? idx[mu] - o[mu] : o[mu] - idx[mu];
      if (d < best_d) best = node, best_d = d;
    }
    if (best == chart.size()) return out;
    origin = best;
  }
  grow(origin, v.fiber(origin).basis);

  // Regular nodes cut off from the origin by irregular ones start their own
  // sweep, seeded from an aligned neighbour when there is one.
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (visited[node] || !v.is_regular(node)) continue;
    Eigen::MatrixXd seed = v.fiber(node).basis;
    for (std::size_t nb : chart.neighborhood(node))
      if (out.valid[nb]) {
        if (auto f = align_to(out.frames[nb], seed)) {
          seed = *f;
          break;
        }
      }
    grow(node, seed);
  }
  return out;
}

SecondFundamentalForm second_fundamental_form(const Connection& conn, const FrameField& frames,
                                              std::size_t node, int fd_order) {
  const Chart& chart = conn.chart();
  if (!(frames.chart == chart)) throw ShapeError("frame field and connection use different charts");
  if (!frames.valid.at(node)) throw IrregularPoint("second fundamental form at irregular node");
  const Eigen::MatrixXd& x = frames.frames[node];
  const auto n = x.rows(), k = x.cols();
  const auto m = static_cast<Eigen::Index>(chart.dim());
  if (static_cast<std::size_t>(n) != conn.rank()) throw ShapeError("frame rank does not match connection");

  SecondFundamentalForm out;
  if (k == 0) {
    out.complement = Eigen::MatrixXd::Identity(n, n);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullU);
    out.complement = svd.matrixU().rightCols(n - k);
  }
  const auto q = n - k;
  out.alpha.setZero(q * m, k);
  out.error.setZero(q * m, k);

  Point p = chart.point(node);
  auto value = [&](std::size_t j) -> Eigen::MatrixXd { return frames.frames[j]; };
  auto valid = [&](std::size_t j) { return frames.valid[j] != 0; };
  const int check_order = fd_order >= 4 ? fd_order - 2 : fd_order + 2;
  double ref2 = 0.0;
  for (Eigen::Index mu = 0; mu < m; ++mu) {
    auto d = grid_derivative(chart, node, static_cast<std::size_t>(mu), fd_order, value, valid);
    auto d_check = grid_derivative(chart, node, static_cast<std::size_t>(mu), check_order, value, valid);
    if (!d || !d_check)
      throw IrregularPoint("no difference stencil along '" + chart.coord_name(static_cast<std::size_t>(mu)) +
                           "' at " + describe(p));
    Eigen::MatrixXd wx = conn.omega(static_cast<std::size_t>(mu), p) * x;
    if (q > 0) {
      out.alpha.middleRows(mu * q, q) = out.complement.transpose() * (*d + wx);
      out.error.middleRows(mu * q, q) = out.complement.transpose() * (*d - *d_check);
    }
    ref2 += d->squaredNorm() + wx.squaredNorm();
  }
  out.reference_scale = std::sqrt(ref2);
  out.noise = out.error.norm();
  return out;
}

Subspace sff_kernel(const SecondFundamentalForm& sff, const Eigen::MatrixXd& frame, double tau,
                    double noise_safety, KernelSpectrum* spectrum) {
  const auto n = frame.rows(), k = frame.cols();
  if (spectrum) *spectrum = {};
  if (k == 0) return Subspace::zero(static_cast<std::size_t>(n));
  if (sff.alpha.cols() != k) throw ShapeError("second fundamental form does not match frame");
  if (sff.alpha.rows() == 0) return {frame};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sff.alpha, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double noise = sff.noise;
  const double cutoff = std::max(tau * std::max(smax, sff.reference_scale), noise_safety * noise);
  Eigen::Index nonzero = 0;
  while (nonzero < sv.size() && sv(nonzero) > cutoff) ++nonzero;
  if (spectrum) {
    spectrum->smallest_kept = nonzero > 0 ? sv(nonzero - 1) : 0.0;
    spectrum->largest_discarded = nonzero < sv.size() ? sv(nonzero) : 0.0;
  }
  Eigen::MatrixXd coeffs = svd.matrixV().rightCols(k - nonzero);
  if (coeffs.cols() == 0) return Subspace::zero(static_cast<std::size_t>(n));
  // frames need not be orthonormal
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame * coeffs);
  return {qr.householderQ() * Eigen::MatrixXd::Identity(n, coeffs.cols())};
}

double FlagReport::regular_fraction() const {
  const SubbundleField& f = flat();
  return double(f.regular_count()) / double(f.chart().size());
}

FlagReport derived_flag(const Connection& conn, const FlagOptions& options) {
  const Chart& chart = conn.chart();
  const std::size_t n = conn.rank();
  FlagReport report;
  report.options = options;

  std::size_t origin = 0;
  if (options.origin) {
    if (!chart.contains(*options.origin)) throw std::out_of_range("flag origin outside chart domain");
    origin = chart.nearest_node(*options.origin);
  } else {
    GridIndex mid(chart.dim());
    for (std::size_t mu = 0; mu < chart.dim(); ++mu) mid[mu] = chart.count(mu) / 2;
    origin = chart.ravel(mid);
  }

  // V(0): kernel of the curvature.
  std::vector<Subspace> fibers(chart.size());
  for (std::size_t node = 0; node < chart.size(); ++node) {
    Point p = chart.point(node);
    try {
      std::vector<Eigen::MatrixXd> mats;
      for (auto& slice : curvature_operators(conn, p)) mats.push_back(std::move(slice.matrix));
      if (mats.empty()) {
        fibers[node] = Subspace::full(n);  // one-dimensional chart: no curvature
      } else {
        fibers[node] = common_kernel(mats, options.tau_rank, curvature_scale(conn, p));
      }
    } catch (const SingularEvaluation& e) {
      throw NumericalError("connection coefficients are singular at " + describe(p) + ": " + e.what());
    }
  }
  SubbundleField w = smooth_refine(SubbundleField(chart, std::move(fibers), std::vector<char>(chart.size(), 1)));

  auto record = [&](std::size_t stage, const SubbundleField& field, const KernelSpectrum& spec,
                    std::size_t failures) {
    if (field.regular_count() == 0)
      throw NumericalError("derived flag: every lattice node is irregular at stage " + std::to_string(stage));
    report.ranks.push_back(field.max_rank());
    report.diagnostics.push_back({stage, field.max_rank(), field.min_rank(), field.regular_count(),
                                  spec.largest_discarded, spec.smallest_kept, failures});
    report.stages.push_back(field);
  };
  record(0, w, {}, 0);

  // Estimated angular error of each fiber.  A fiber computed from a lattice
  // difference carries that error into the next stage, where differentiating
  // it again costs roughly a factor 1/h; the two-stencil estimate of the new
  // stage does not see it.
  std::vector<double> fiber_error(chart.size(), 0.0);
  double min_spacing = std::numeric_limits<double>::infinity();
  for (std::size_t mu = 0; mu < chart.dim(); ++mu) min_spacing = std::min(min_spacing, chart.spacing(mu));

  for (std::size_t step = 1; step <= n + 1; ++step) {
    if (w.max_rank() == 0) {
      report.converged = true;
      break;
    }
    FrameField frames = gauge_align(w, origin);
    for (std::size_t node : frames.failures) w.mark_irregular(node);

    std::vector<Subspace> next(chart.size(), Subspace::zero(n));
    std::vector<char> mask(chart.size(), 0);
    KernelSpectrum worst;
    worst.smallest_kept = std::numeric_limits<double>::infinity();
    std::vector<std::optional<SecondFundamentalForm>> forms(chart.size());
    for (std::size_t node = 0; node < chart.size(); ++node) {
      if (!w.is_regular(node) || !frames.valid[node]) continue;
      try {
        forms[node] = second_fundamental_form(conn, frames, node, options.fd_order);
      } catch (const IrregularPoint&) {
        // too few aligned neighbours for a stencil: stays excluded
      }
    }
    std::vector<double> next_error(chart.size(), 0.0);
    for (std::size_t node = 0; node < chart.size(); ++node) {
      if (!forms[node]) continue;
      SecondFundamentalForm sff = *forms[node];
      double inherited = 0.0;
      for (std::size_t nb : chart.neighborhood(node)) {
        if (forms[nb]) sff.noise = std::max(sff.noise, forms[nb]->error.norm());
        inherited = std::max(inherited, fiber_error[nb]);
      }
      sff.noise = std::max(sff.noise, 2.0 * inherited / min_spacing);
      KernelSpectrum spec;
      next[node] = sff_kernel(sff, frames.frames[node], options.tau_rank, options.noise_safety, &spec);
      mask[node] = 1;
      next_error[node] = fiber_error[node];
      if (spec.smallest_kept > 0)
        next_error[node] += std::max(sff.noise, spec.largest_discarded) / spec.smallest_kept;
      worst.largest_discarded = std::max(worst.largest_discarded, spec.largest_discarded);
      if (spec.smallest_kept > 0) worst.smallest_kept = std::min(worst.smallest_kept, spec.smallest_kept);
    }
    if (!std::isfinite(worst.smallest_kept)) worst.smallest_kept = 0.0;
    SubbundleField refined = smooth_refine(SubbundleField(chart, std::move(next), std::move(mask)));

    bool stable = true;
    for (std::size_t node = 0; node < chart.size() && stable; ++node) {
      if (!refined.is_regular(node)) continue;
      stable = refined.fiber(node).rank() == w.fiber(node).rank() &&
               max_principal_angle(refined.fiber(node), w.fiber(node)) < options.tau_stab;
    }
    report.iterations = step;
    record(step, refined, worst, frames.failures.size());
    w = std::move(refined);
    fiber_error = std::move(next_error);
    if (stable) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged && w.max_rank() == 0) report.converged = true;

  for (std::size_t node = 0; node < chart.size(); ++node)
    if (!report.flat().is_regular(node)) report.irregular.push_back(node);
  return report;
}

bool is_regular(const FlagReport& report, std::size_t node) {
  const SubbundleField& f = report.flat();
  if (node >= f.chart().size()) throw std::out_of_range("is_regular: node outside lattice");
  for (std::size_t nb : f.chart().neighborhood(node))
    if (!f.is_regular(nb)) return false;
  return true;
}

bool is_regular(const FlagReport& report, std::span<const double> p) {
  const Chart& chart = report.flat().chart();
  if (!chart.contains(p)) throw std::out_of_range("is_regular: point outside chart domain");
  return is_regular(report, chart.nearest_node(p));
}

Subspace fiber_at(const SubbundleField& field, std::span<const double> p, int interp_points) {
  const Chart& chart = field.chart();
  if (!chart.contains(p)) throw std::out_of_range("fiber_at: point outside chart domain");
  std::size_t near = chart.nearest_node(p);
  if (!field.is_regular(near)) throw IrregularPoint("fiber_at: nearest lattice node is irregular");
  FrameField frames = gauge_align(field, near);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(field.ambient(), frames.frames[near].cols());
  for (auto [node, weight] : interpolation_weights(chart, p, interp_points)) {
    if (!frames.valid[node] || frames.frames[node].cols() != acc.cols())
      throw IrregularPoint("fiber_at: interpolation stencil touches irregular nodes");
    acc += weight * frames.frames[node];
  }
  return Subspace::span(acc);
}

}  // namespace dflag
