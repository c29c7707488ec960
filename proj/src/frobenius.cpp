#include "dflag/frobenius.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dflag/error.hpp"
#include "dflag/stencil.hpp"

namespace dflag {

namespace {

std::string describe(std::span<const double> p) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ')';
  return os.str();
}

std::vector<std::size_t> resolve_axis_order(std::vector<std::size_t> order, std::size_t m) {
  if (order.empty()) {
    order.resize(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k)
    if (sorted.size() != m || sorted[k] != k) throw ShapeError("axis order must be a permutation of the chart axes");
  return order;
}

}  // namespace

AdaptedFrame adapted_frame(const Connection& conn, const SubbundleField& flat, std::size_t origin,
                           const AdaptedFrameOptions& options) {
  const Chart& chart = conn.chart();
  if (!(flat.chart() == chart)) throw ShapeError("subbundle field and connection use different charts");
  const std::size_t big_n = conn.rank();
  if (flat.ambient() != big_n) throw ShapeError("subbundle field does not live in the connection's fibers");
  const std::size_t n = flat.max_rank();
  const std::size_t m = chart.dim();

  std::vector<Subspace> comp(chart.size(), Subspace::zero(big_n));
  std::vector<char> mask(chart.size(), 0);
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!flat.is_regular(node) || flat.fiber(node).rank() != n) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(flat.fiber(node).basis, Eigen::ComputeFullU);
    comp[node] = {svd.matrixU().rightCols(static_cast<Eigen::Index>(big_n - n))};
    if (n == 0) comp[node] = Subspace::full(big_n);
    mask[node] = 1;
  }
  SubbundleField complement(chart, std::move(comp), mask);
  FrameField xf = gauge_align(flat, origin);
  FrameField yf = gauge_align(complement, origin);

  AdaptedFrame out(chart);
  out.flat_rank = n;
  out.fiber_rank = big_n;
  out.frames.assign(chart.size(), Eigen::MatrixXd());
  out.form.assign(chart.size(), {});
  out.valid.assign(chart.size(), 0);
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!mask[node] || !xf.valid[node] || !yf.valid[node]) continue;
    Eigen::MatrixXd f(big_n, big_n);
    f << xf.frames[node], yf.frames[node];
    out.frames[node] = std::move(f);
    out.valid[node] = 1;
  }

  const int check_order = options.fd_order >= 4 ? options.fd_order - 2 : options.fd_order + 2;
  std::vector<char> has_form(chart.size(), 0);
  auto value = [&](std::size_t j) -> Eigen::MatrixXd { return out.frames[j]; };
  auto valid = [&](std::size_t j) { return out.valid[j] != 0; };
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!out.valid[node]) continue;
    Point p = chart.point(node);
    const Eigen::MatrixXd& f = out.frames[node];
    std::vector<Eigen::MatrixXd> form;
    double defect = 0.0, noise = 0.0;
    bool ok = true;
    for (std::size_t mu = 0; mu < m && ok; ++mu) {
      auto d = grid_derivative(chart, node, mu, options.fd_order, value, valid);
      auto d_check = grid_derivative(chart, node, mu, check_order, value, valid);
      if (!d || !d_check) {
        ok = false;
        break;
      }
      Eigen::MatrixXd omega_f = conn.omega(mu, p) * f;
      form.push_back(f.transpose() * (*d + omega_f));
      if (n > 0 && n < big_n) {
        const auto rows = static_cast<Eigen::Index>(big_n - n), cols = static_cast<Eigen::Index>(n);
        defect = std::max(defect, form.back().bottomLeftCorner(rows, cols).cwiseAbs().maxCoeff());
        Eigen::MatrixXd diff = f.transpose() * (*d - *d_check);
        noise = std::max(noise, diff.bottomLeftCorner(rows, cols).cwiseAbs().maxCoeff());
      }
    }
    if (!ok) continue;
    out.form[node] = std::move(form);
    has_form[node] = 1;
    out.block_defect = std::max(out.block_defect, defect);
    out.block_noise = std::max(out.block_noise, noise);
    out.block_excess =
        std::max(out.block_excess, defect / std::max(options.block_tolerance, options.noise_safety * noise));
  }
  out.valid = std::move(has_form);

  if (options.check_block && out.block_excess > 1.0) {
    std::ostringstream os;
    os << "adapted frame is not block triangular: lower-left block reaches " << out.block_defect
       << " (tolerance " << options.block_tolerance << ", discretisation error up to " << out.block_noise << ")";
    throw NumericalError(os.str());
  }
  return out;
}

double flatness_residual(const AdaptedFrame& adapted, std::size_t node, int fd_order) {
  const Chart& chart = adapted.chart;
  if (!adapted.valid.at(node)) throw IrregularPoint("flatness residual at an invalid node");
  const std::size_t m = chart.dim();
  auto valid = [&](std::size_t j) { return adapted.valid[j] != 0; };
  double worst = 0.0;
  for (std::size_t mu = 0; mu < m; ++mu)
    for (std::size_t nu = mu + 1; nu < m; ++nu) {
      auto phi_nu = [&](std::size_t j) { return adapted.phi(j, nu); };
      auto phi_mu = [&](std::size_t j) { return adapted.phi(j, mu); };
      auto d_mu_phi_nu = grid_derivative(chart, node, mu, fd_order, phi_nu, valid);
      auto d_nu_phi_mu = grid_derivative(chart, node, nu, fd_order, phi_mu, valid);
      if (!d_mu_phi_nu || !d_nu_phi_mu) throw IrregularPoint("flatness residual: no difference stencil");
      Eigen::MatrixXd a = adapted.phi(node, mu), b = adapted.phi(node, nu);
      Eigen::MatrixXd r = *d_mu_phi_nu - *d_nu_phi_mu + a * b - b * a;
      if (r.size()) worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
  return worst;
}

ParallelFrameField integrate_parallel_frame(const AdaptedFrame& adapted, std::span<const double> x0,
                                            const IntegrationOptions& options) {
  const Chart& chart = adapted.chart;
  const std::size_t m = chart.dim();
  const std::size_t n = adapted.flat_rank;
  if (!chart.contains(x0)) throw std::out_of_range("base point outside chart domain");
  if (options.substeps == 0) throw std::invalid_argument("substeps must be positive");

  ParallelFrameField out(chart);
  out.base.assign(x0.begin(), x0.end());
  out.axis_order = resolve_axis_order(options.axis_order, m);
  out.transfer.assign(chart.size(), Eigen::MatrixXd());
  out.flat_frame.assign(chart.size(), Eigen::MatrixXd());
  out.valid.assign(chart.size(), 0);

  // phi per node, per axis
  std::vector<std::vector<Eigen::MatrixXd>> phi(chart.size());
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!adapted.valid[node]) continue;
    for (std::size_t mu = 0; mu < m; ++mu) phi[node].push_back(adapted.phi(node, mu));
    out.flat_frame[node] = adapted.flat_frame(node);
  }

  // Frame at the base point.
  out.base_frame = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(adapted.fiber_rank), static_cast<Eigen::Index>(n));
  for (auto [node, weight] : interpolation_weights(chart, x0, options.interp_points)) {
    if (!adapted.valid[node]) throw IrregularPoint("base point " + describe(x0) + " is not in the regular set");
    out.base_frame += weight * out.flat_frame[node];
  }

  auto phi_along = [&](const Point& x, std::size_t axis) -> std::optional<Eigen::MatrixXd> {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto [node, weight] : interpolation_weights(chart, x, options.interp_points)) {
      if (!adapted.valid[node]) return std::nullopt;
      acc += weight * phi[node][axis];
    }
    return acc;
  };

  // One RK4 segment along `axis`; false if phi is unavailable on the way.
  auto integrate_segment = [&](Point& x, Eigen::MatrixXd& a, std::size_t axis, double target) {
    const double cell = chart.spacing(axis) / double(options.substeps);
    const double len = std::fabs(target - x[axis]);
    if (len == 0.0) return true;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(len / cell - 1e-9)));
    const double h = (target - x[axis]) / double(steps);
    const double start = x[axis];
    for (std::size_t s = 0; s < steps; ++s) {
      Point y = x;
      y[axis] = start + double(s) * h;
      auto p1 = phi_along(y, axis);
      y[axis] += 0.5 * h;
      auto p2 = phi_along(y, axis);
      y[axis] = s + 1 == steps ? target : start + double(s + 1) * h;
      auto p3 = phi_along(y, axis);
      if (!p1 || !p2 || !p3) return false;
      Eigen::MatrixXd k1 = -*p1 * a;
      Eigen::MatrixXd k2 = -*p2 * (a + 0.5 * h * k1);
      Eigen::MatrixXd k3 = -*p2 * (a + 0.5 * h * k2);
      Eigen::MatrixXd k4 = -*p3 * (a + h * k3);
      a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x[axis] = target;
    return true;
  };

  struct State {
    Point x;
    GridIndex index;
    Eigen::MatrixXd a;
    bool ok;
  };
  std::vector<State> states{{out.base, GridIndex(m, 0),
                             Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), true}};
  for (std::size_t axis : out.axis_order) {
    std::vector<State> next;
    next.reserve(states.size() * chart.count(axis));
    for (const State& st : states) {
      const std::size_t count = chart.count(axis);
      std::vector<State> line(count);
      // First lattice index at or above the start coordinate.
      std::size_t up = 0;
      const double tol = 1e-12 * (chart.upper(axis) - chart.lower(axis));
      while (up < count && chart.coordinate(axis, up) < st.x[axis] - tol) ++up;
      for (int dir : {+1, -1}) {
        State cur = st;
        std::size_t i = dir > 0 ? up : up;
        if (dir < 0) {
          if (up == 0) continue;
          i = up - 1;
        }
        for (;;) {
          if (cur.ok) cur.ok = integrate_segment(cur.x, cur.a, axis, chart.coordinate(axis, i));
          cur.x[axis] = chart.coordinate(axis, i);
          cur.index[axis] = i;
          line[i] = cur;
          if (dir > 0 ? i + 1 >= count : i == 0) break;
          i = dir > 0 ? i + 1 : i - 1;
        }
      }
      for (auto& s : line) next.push_back(std::move(s));
    }
    states = std::move(next);
  }

  for (State& st : states) {
    std::size_t node = chart.ravel(st.index);
    if (!st.ok || !adapted.valid[node]) continue;
    if (n > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(st.a);
      const auto& sv = svd.singularValues();
      if (!st.a.allFinite() || sv(sv.size() - 1) <= 1e-14 * sv(0))
        throw NumericalError("transfer matrix is singular at " + describe(chart.point(node)));
    }
    out.transfer[node] = std::move(st.a);
    out.valid[node] = 1;
  }
  return out;
}

SectionField make_parallel_section(const ParallelFrameField& pf, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd& x0 = pf.base_frame;
  if (w.size() != x0.rows()) throw ShapeError("fiber vector has wrong length");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(x0.cols());
  if (x0.cols() > 0) c = x0.colPivHouseholderQr().solve(w);
  const double dist = (x0 * c - w).norm();
  if (dist > 1e-6 * w.norm()) {
    std::ostringstream os;
    os << "vector is at distance " << dist << " from the subbundle fiber at the base point";
    throw NotInSubbundle(os.str());
  }
  const Chart& chart = pf.chart;
  Eigen::MatrixXd values(x0.rows(), static_cast<Eigen::Index>(chart.size()));
  for (std::size_t node = 0; node < chart.size(); ++node) {
    auto col = static_cast<Eigen::Index>(node);
    if (pf.valid[node])
      values.col(col) = pf.flat_frame[node] * (pf.transfer[node] * c);
    else
      values.col(col).setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return SectionField::from_grid(chart, std::move(values));
}

Eigen::VectorXd parallel_transport(const Connection& conn, const std::vector<Point>& path,
                                   const Eigen::VectorXd& w0, const TransportOptions& options) {
  const Chart& chart = conn.chart();
  if (static_cast<std::size_t>(w0.size()) != conn.rank()) throw ShapeError("fiber vector has wrong length");
  if (path.empty()) throw ShapeError("transport path is empty");
  for (const Point& v : path)
    if (!chart.contains(v)) throw std::out_of_range("transport path vertex " + describe(v) + " outside chart domain");

  double max_step = options.max_step;
  if (max_step <= 0.0) {
    max_step = std::numeric_limits<double>::infinity();
    for (std::size_t mu = 0; mu < chart.dim(); ++mu) max_step = std::min(max_step, chart.spacing(mu) / 16.0);
  }
  const std::size_t m = chart.dim();
  Eigen::VectorXd w = w0;
  auto rhs = [&](const Point& x, const Eigen::VectorXd& dir, const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (std::size_t mu = 0; mu < m; ++mu) {
      double c = dir[static_cast<Eigen::Index>(mu)];
      if (c != 0.0) out -= c * (conn.omega(mu, x) * v);
    }
    return out;
  };
  try {
    for (std::size_t seg = 0; seg + 1 < path.size(); ++seg) {
      const Point& a = path[seg];
      const Point& b = path[seg + 1];
      Eigen::VectorXd dir(static_cast<Eigen::Index>(m));
      for (std::size_t mu = 0; mu < m; ++mu) dir[static_cast<Eigen::Index>(mu)] = b[mu] - a[mu];
      const double len = dir.norm();
      if (len == 0.0) continue;
      std::size_t steps = options.steps_per_segment;
      if (steps == 0) steps = static_cast<std::size_t>(std::max(1.0, std::ceil(len / max_step - 1e-9)));
      const double h = 1.0 / double(steps);
      auto at = [&](double t) {
        Point x(m);
        for (std::size_t mu = 0; mu < m; ++mu) x[mu] = a[mu] + t * (b[mu] - a[mu]);
        return x;
      };
      for (std::size_t s = 0; s < steps; ++s) {
        double t = double(s) * h;
        Eigen::VectorXd k1 = rhs(at(t), dir, w);
        Eigen::VectorXd k2 = rhs(at(t + 0.5 * h), dir, w + 0.5 * h * k1);
        Eigen::VectorXd k3 = rhs(at(t + 0.5 * h), dir, w + 0.5 * h * k2);
        Eigen::VectorXd k4 = rhs(at(s + 1 == steps ? 1.0 : t + h), dir, w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
  } catch (const SingularEvaluation& e) {
    throw NumericalError(std::string("parallel transport hit a singular coefficient: ") + e.what());
  }
  if (!w.allFinite()) throw NumericalError("parallel transport diverged");
  return w;
}

std::vector<Point> axis_path(std::span<const double> from, std::span<const double> to,
                             const std::vector<std::size_t>& axis_order) {
  if (from.size() != to.size()) throw ShapeError("path endpoints have different dimensions");
  auto order = resolve_axis_order(axis_order, from.size());
  std::vector<Point> path{Point(from.begin(), from.end())};
  for (std::size_t axis : order) {
    Point next = path.back();
    if (next[axis] == to[axis]) continue;
    next[axis] = to[axis];
    path.push_back(std::move(next));
  }
  return path;
}

double parallelism_residual(const Connection& conn, const SectionField& s, int fd_order) {
  const Chart& chart = conn.chart();
  double worst = 0.0;
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (chart.is_boundary(node)) continue;
    Eigen::MatrixXd d = covariant_derivative(conn, s, node, fd_order);
    if (!d.allFinite()) continue;
    worst = std::max(worst, d.norm());
  }
  return worst;
}

}  // namespace dflag
