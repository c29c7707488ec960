#include "dflag/bundle.hpp"

#include <stdexcept>

#include "dflag/error.hpp"
#include "dflag/stencil.hpp"

namespace dflag {

Connection::Connection(Chart chart, std::size_t rank, std::vector<ScalarField> omega)
    : chart_(std::move(chart)), rank_(rank), omega_(std::move(omega)) {
  const std::size_t m = chart_.dim();
  if (rank_ == 0) throw ShapeError("connection: fiber rank must be positive");
  if (omega_.size() != rank_ * rank_ * m)
    throw ShapeError("connection: expected " + std::to_string(rank_ * rank_ * m) +
                     " coefficients, got " + std::to_string(omega_.size()));
  for (ScalarField& f : omega_) {
    if (f.is_constant() && f.coords()->empty()) f = ScalarField(f.root(), chart_.coords());
    if (*f.coords() != *chart_.coords())
      throw ShapeError("connection coefficient '" + f.str() + "' is not defined on the chart coordinates");
    f = ScalarField(f.root(), chart_.coords());
  }
  domega_.reserve(omega_.size() * m);
  for (const ScalarField& f : omega_)
    for (std::size_t nu = 0; nu < m; ++nu) domega_.push_back(f.derivative(nu));
}

Connection Connection::zero(Chart chart, std::size_t rank) {
  auto coords = chart.coords();
  std::vector<ScalarField> omega(rank * rank * chart.dim(), ScalarField::constant(0.0, coords));
  return Connection(std::move(chart), rank, std::move(omega));
}

const ScalarField& Connection::coefficient(std::size_t i, std::size_t j, std::size_t mu) const {
  if (i >= rank_ || j >= rank_ || mu >= dim()) throw std::out_of_range("connection coefficient index");
  return omega_[index(i, j, mu)];
}

const ScalarField& Connection::coefficient_derivative(std::size_t i, std::size_t j, std::size_t mu,
                                                      std::size_t nu) const {
  if (i >= rank_ || j >= rank_ || mu >= dim() || nu >= dim())
    throw std::out_of_range("connection coefficient index");
  return domega_[index(i, j, mu) * dim() + nu];
}

Eigen::MatrixXd Connection::omega(std::size_t mu, std::span<const double> p) const {
  Eigen::MatrixXd w(rank_, rank_);
  for (std::size_t i = 0; i < rank_; ++i)
    for (std::size_t j = 0; j < rank_; ++j) w(i, j) = omega_[index(i, j, mu)](p);
  return w;
}

std::vector<Eigen::MatrixXd> Connection::omega(std::span<const double> p) const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(dim());
  for (std::size_t mu = 0; mu < dim(); ++mu) out.push_back(omega(mu, p));
  return out;
}

Eigen::MatrixXd Connection::omega_derivative(std::size_t mu, std::size_t nu,
                                             std::span<const double> p) const {
  Eigen::MatrixXd w(rank_, rank_);
  for (std::size_t i = 0; i < rank_; ++i)
    for (std::size_t j = 0; j < rank_; ++j) w(i, j) = domega_[index(i, j, mu) * dim() + nu](p);
  return w;
}

bool Connection::is_zero() const {
  for (const ScalarField& f : omega_)
    if (!f.is_zero()) return false;
  return true;
}

Connection connection_from_christoffel(const Christoffel& gamma, const Chart& chart) {
  const std::size_t m = chart.dim();
  if (gamma.size() != m * m * m)
    throw ShapeError("christoffel symbols: expected " + std::to_string(m * m * m) + " entries, got " +
                     std::to_string(gamma.size()));
  std::vector<ScalarField> omega(m * m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t mu = 0; mu < m; ++mu)
      for (std::size_t j = 0; j < m; ++j) omega[(i * m + j) * m + mu] = gamma[(i * m + mu) * m + j];
  return Connection(chart, m, std::move(omega));
}

Eigen::MatrixXd curvature(const Connection& conn, std::size_t mu, std::size_t nu,
                          std::span<const double> p) {
  Eigen::MatrixXd wm = conn.omega(mu, p);
  Eigen::MatrixXd wn = conn.omega(nu, p);
  return conn.omega_derivative(nu, mu, p) - conn.omega_derivative(mu, nu, p) + wm * wn - wn * wm;
}

std::vector<CurvatureSlice> curvature_operators(const Connection& conn, std::span<const double> p) {
  const std::size_t m = conn.dim();
  std::vector<Eigen::MatrixXd> w = conn.omega(p);
  std::vector<CurvatureSlice> out;
  for (std::size_t mu = 0; mu < m; ++mu)
    for (std::size_t nu = mu + 1; nu < m; ++nu)
      out.push_back({mu, nu,
                     conn.omega_derivative(nu, mu, p) - conn.omega_derivative(mu, nu, p) +
                         w[mu] * w[nu] - w[nu] * w[mu]});
  return out;
}

double curvature_scale(const Connection& conn, std::span<const double> p) {
  const std::size_t m = conn.dim();
  std::vector<Eigen::MatrixXd> w = conn.omega(p);
  double scale = 0.0;
  for (std::size_t mu = 0; mu < m; ++mu)
    for (std::size_t nu = 0; nu < m; ++nu) {
      if (mu == nu) continue;
      scale = std::max(scale, conn.omega_derivative(nu, mu, p).norm() + w[mu].norm() * w[nu].norm());
    }
  return scale;
}

SectionField SectionField::from_expressions(Chart chart, std::vector<ScalarField> components) {
  if (components.empty()) throw ShapeError("section needs at least one component");
  for (ScalarField& f : components) {
    if (f.is_constant() && f.coords()->empty()) f = ScalarField(f.root(), chart.coords());
    if (*f.coords() != *chart.coords()) throw ShapeError("section component not on chart coordinates");
  }
  return SectionField(std::move(chart), std::move(components));
}

SectionField SectionField::from_grid(Chart chart, Eigen::MatrixXd values) {
  if (values.rows() == 0) throw ShapeError("section needs at least one component");
  if (static_cast<std::size_t>(values.cols()) != chart.size())
    throw ShapeError("grid section must cover every lattice node");
  return SectionField(std::move(chart), std::move(values));
}

std::size_t SectionField::rank() const {
  if (is_grid_backed()) return static_cast<std::size_t>(std::get<Eigen::MatrixXd>(data_).rows());
  return std::get<std::vector<ScalarField>>(data_).size();
}

Eigen::VectorXd SectionField::at_node(std::size_t node) const {
  if (is_grid_backed()) return std::get<Eigen::MatrixXd>(data_).col(static_cast<Eigen::Index>(node));
  return at(chart_.point(node));
}

Eigen::VectorXd SectionField::at(std::span<const double> p) const {
  const auto& comps = expressions();
  Eigen::VectorXd v(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) v[static_cast<Eigen::Index>(i)] = comps[i](p);
  return v;
}

const std::vector<ScalarField>& SectionField::expressions() const {
  if (is_grid_backed()) throw std::logic_error("section is grid-backed");
  return std::get<std::vector<ScalarField>>(data_);
}

const Eigen::MatrixXd& SectionField::samples() const {
  if (!is_grid_backed()) throw std::logic_error("section is expression-backed");
  return std::get<Eigen::MatrixXd>(data_);
}

Eigen::MatrixXd covariant_derivative(const Connection& conn, const SectionField& s,
                                     std::span<const double> p) {
  if (s.rank() != conn.rank()) throw ShapeError("section rank does not match connection rank");
  const auto& comps = s.expressions();
  const std::size_t n = conn.rank(), m = conn.dim();
  Eigen::VectorXd v = s.at(p);
  Eigen::MatrixXd out(n, m);
  for (std::size_t mu = 0; mu < m; ++mu) {
    Eigen::VectorXd d(n);
    for (std::size_t i = 0; i < n; ++i) d[static_cast<Eigen::Index>(i)] = comps[i].derivative(mu)(p);
    out.col(static_cast<Eigen::Index>(mu)) = d + conn.omega(mu, p) * v;
  }
  return out;
}

Eigen::MatrixXd covariant_derivative(const Connection& conn, const SectionField& s, std::size_t node,
                                     int fd_order) {
  if (!(s.chart() == conn.chart())) throw ShapeError("section and connection use different charts");
  if (!s.is_grid_backed()) return covariant_derivative(conn, s, conn.chart().point(node));
  if (s.rank() != conn.rank()) throw ShapeError("section rank does not match connection rank");
  const Chart& chart = conn.chart();
  const Eigen::MatrixXd& samples = s.samples();
  Point p = chart.point(node);
  Eigen::VectorXd v = samples.col(static_cast<Eigen::Index>(node));
  Eigen::MatrixXd out(conn.rank(), conn.dim());
  auto value = [&](std::size_t k) -> Eigen::VectorXd { return samples.col(static_cast<Eigen::Index>(k)); };
  auto always = [](std::size_t) { return true; };
  for (std::size_t mu = 0; mu < conn.dim(); ++mu) {
    auto d = grid_derivative(chart, node, mu, fd_order, value, always);
    out.col(static_cast<Eigen::Index>(mu)) = *d + conn.omega(mu, p) * v;
  }
  return out;
}

std::size_t sym2_index(std::size_t i, std::size_t j, std::size_t m) {
  if (i > j) std::swap(i, j);
  if (j >= m) throw std::out_of_range("sym2_index");
  if (i == j) return i;
  std::size_t k = m;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b, ++k)
      if (a == i && b == j) return k;
  throw std::logic_error("unreachable");
}

Eigen::MatrixXd sym2_to_matrix(const Eigen::VectorXd& c, std::size_t m) {
  if (static_cast<std::size_t>(c.size()) != m * (m + 1) / 2) throw ShapeError("sym2 vector has wrong size");
  Eigen::MatrixXd h(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) h(i, j) = c[static_cast<Eigen::Index>(sym2_index(i, j, m))];
  return h;
}

Eigen::VectorXd matrix_to_sym2(const Eigen::MatrixXd& h) {
  const auto m = static_cast<std::size_t>(h.rows());
  Eigen::VectorXd c(m * (m + 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j)
      c[static_cast<Eigen::Index>(sym2_index(i, j, m))] = 0.5 * (h(i, j) + h(j, i));
  return c;
}

Connection induce_sym2(const Connection& tm_conn) {
  const std::size_t m = tm_conn.dim();
  if (tm_conn.rank() != m)
    throw ShapeError("induce_sym2 needs a tangent-bundle connection (rank " +
                     std::to_string(tm_conn.rank()) + " over a " + std::to_string(m) + "-dimensional chart)");
  const std::size_t n = m * (m + 1) / 2;
  std::vector<std::pair<std::size_t, std::size_t>> pairs(n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) pairs[sym2_index(i, j, m)] = {i, j};
  auto coords = tm_conn.chart().coords();
  std::vector<ScalarField> omega(n * n * m, ScalarField::constant(0.0, coords));
  // (nabla_mu h)_ij = d_mu h_ij - Gamma^p_{mu i} h_pj - Gamma^p_{mu j} h_ip
  for (std::size_t mu = 0; mu < m; ++mu)
    for (std::size_t a = 0; a < n; ++a) {
      auto [i, j] = pairs[a];
      for (std::size_t p = 0; p < m; ++p) {
        std::size_t b1 = sym2_index(p, j, m);
        std::size_t b2 = sym2_index(i, p, m);
        ScalarField& w1 = omega[(a * n + b1) * m + mu];
        w1 = w1 - tm_conn.coefficient(p, i, mu);
        ScalarField& w2 = omega[(a * n + b2) * m + mu];
        w2 = w2 - tm_conn.coefficient(p, j, mu);
      }
    }
  return Connection(tm_conn.chart(), n, std::move(omega));
}

Eigen::MatrixXd evaluate(const FieldMatrix& fm, std::size_t n, std::span<const double> p) {
  if (fm.size() != n * n) throw ShapeError("field matrix has wrong size");
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = fm[i * n + j](p);
  return out;
}

Connection gauge_transform(const Connection& conn, const FieldMatrix& g, const FieldMatrix& g_inverse) {
  const std::size_t n = conn.rank(), m = conn.dim();
  if (g.size() != n * n || g_inverse.size() != n * n)
    throw ShapeError("gauge transform: frame change must be " + std::to_string(n) + "x" + std::to_string(n));
  auto coords = conn.chart().coords();
  auto lift = [&](const ScalarField& f) {
    if (f.is_constant() && f.coords()->empty()) return ScalarField(f.root(), coords);
    if (*f.coords() != *coords) throw ShapeError("frame change not defined on chart coordinates");
    return ScalarField(f.root(), coords);
  };
  FieldMatrix gg, gi;
  for (const auto& f : g) gg.push_back(lift(f));
  for (const auto& f : g_inverse) gi.push_back(lift(f));

  std::vector<ScalarField> omega(n * n * m, ScalarField::constant(0.0, coords));
  for (std::size_t mu = 0; mu < m; ++mu) {
    // t = omega_mu g + d_mu g
    FieldMatrix t(n * n, ScalarField::constant(0.0, coords));
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t b = 0; b < n; ++b) {
        ScalarField acc = gg[c * n + b].derivative(mu);
        for (std::size_t d = 0; d < n; ++d) acc = acc + conn.coefficient(c, d, mu) * gg[d * n + b];
        t[c * n + b] = acc;
      }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        ScalarField acc = ScalarField::constant(0.0, coords);
        for (std::size_t c = 0; c < n; ++c) acc = acc + gi[a * n + c] * t[c * n + b];
        omega[(a * n + b) * m + mu] = acc;
      }
  }
  return Connection(conn.chart(), n, std::move(omega));
}

}  // namespace dflag
