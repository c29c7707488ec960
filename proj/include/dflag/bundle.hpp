#pragma once

// Connections on trivialised vector bundles over a chart.
//
// Index convention: a connection of fiber rank N over an m-dimensional chart is
// stored as the coefficients omega^i_j(d/dx^mu), so that
//
//     nabla_mu X_j = sum_i X_i omega^i_{j mu}
//
// and on fiber components (nabla_mu s)^i = d_mu s^i + omega^i_{j mu} s^j.
// For the tangent bundle in a coordinate frame, omega^i_{j mu} = Gamma^i_{mu j}:
// the first lower Christoffel index is the differentiation direction.

#include <Eigen/Dense>
#include <cstddef>
#include <variant>
#include <vector>

#include "dflag/chart.hpp"
#include "dflag/expr.hpp"

namespace dflag {

class Connection {
 public:
  /// `omega` holds N*N*m fields at index (i*N + j)*m + mu.
  Connection(Chart chart, std::size_t rank, std::vector<ScalarField> omega);

  static Connection zero(Chart chart, std::size_t rank);

  const Chart& chart() const noexcept { return chart_; }
  std::size_t rank() const noexcept { return rank_; }
  std::size_t dim() const noexcept { return chart_.dim(); }

  const ScalarField& coefficient(std::size_t i, std::size_t j, std::size_t mu) const;
  /// d/dx^nu of omega^i_{j mu}.
  const ScalarField& coefficient_derivative(std::size_t i, std::size_t j, std::size_t mu,
                                            std::size_t nu) const;
  const std::vector<ScalarField>& coefficients() const noexcept { return omega_; }

  /// The N x N matrix omega(d/dx^mu) at p.
  Eigen::MatrixXd omega(std::size_t mu, std::span<const double> p) const;
  std::vector<Eigen::MatrixXd> omega(std::span<const double> p) const;
  /// d/dx^nu of omega(d/dx^mu) at p.
  Eigen::MatrixXd omega_derivative(std::size_t mu, std::size_t nu, std::span<const double> p) const;

  bool is_zero() const;

 private:
  std::size_t index(std::size_t i, std::size_t j, std::size_t mu) const {
    return (i * rank_ + j) * chart_.dim() + mu;
  }

  Chart chart_;
  std::size_t rank_;
  std::vector<ScalarField> omega_;
  std::vector<ScalarField> domega_;  // index(i,j,mu)*m + nu
};

/// Christoffel symbols Gamma^i_{mu j}, stored at (i*m + mu)*m + j.
using Christoffel = std::vector<ScalarField>;

Connection connection_from_christoffel(const Christoffel& gamma, const Chart& chart);

struct CurvatureSlice {
  std::size_t mu;
  std::size_t nu;
  Eigen::MatrixXd matrix;  // R(d_mu, d_nu) acting on fiber components
};

/// R_{mu nu} = d_mu omega_nu - d_nu omega_mu + [omega_mu, omega_nu] for every mu < nu.
std::vector<CurvatureSlice> curvature_operators(const Connection& conn, std::span<const double> p);

/// Curvature for an arbitrary ordered pair (R_{nu mu} = -R_{mu nu}).
Eigen::MatrixXd curvature(const Connection& conn, std::size_t mu, std::size_t nu,
                          std::span<const double> p);

/// Size of the terms that make up R at p; the reference scale for deciding
/// whether a computed curvature is numerically zero.
double curvature_scale(const Connection& conn, std::span<const double> p);

/// A section of the bundle, either closed-form or sampled on the chart lattice.
class SectionField {
 public:
  static SectionField from_expressions(Chart chart, std::vector<ScalarField> components);
  /// `values` is N x chart.size(), one column per lattice node.
  static SectionField from_grid(Chart chart, Eigen::MatrixXd values);

  const Chart& chart() const noexcept { return chart_; }
  std::size_t rank() const;
  bool is_grid_backed() const noexcept { return std::holds_alternative<Eigen::MatrixXd>(data_); }

  Eigen::VectorXd at_node(std::size_t node) const;
  /// Only for expression-backed sections.
  Eigen::VectorXd at(std::span<const double> p) const;
  const std::vector<ScalarField>& expressions() const;
  const Eigen::MatrixXd& samples() const;

 private:
  SectionField(Chart chart, std::variant<std::vector<ScalarField>, Eigen::MatrixXd> data)
      : chart_(std::move(chart)), data_(std::move(data)) {}

  Chart chart_;
  std::variant<std::vector<ScalarField>, Eigen::MatrixXd> data_;
};

/// Default accuracy order of lattice derivatives.
inline constexpr int kDefaultFdOrder = 6;

/// (nabla_mu s)^i as an N x m matrix at an arbitrary point (expression-backed only;
/// exact derivatives).
Eigen::MatrixXd covariant_derivative(const Connection& conn, const SectionField& s,
                                     std::span<const double> p);

/// (nabla_mu s)^i at a lattice node.  Expression-backed sections use exact
/// derivatives, grid-backed ones lattice differences of the given order.
Eigen::MatrixXd covariant_derivative(const Connection& conn, const SectionField& s, std::size_t node,
                                     int fd_order = kDefaultFdOrder);

/// Fiber rank m(m+1)/2 connection on symmetric 2-tensors induced by a tangent
/// connection.  Basis: dx^1 (x) dx^1, ..., dx^m (x) dx^m, then
/// dx^i (x) dx^j + dx^j (x) dx^i for i < j in lexicographic order.
Connection induce_sym2(const Connection& tm_conn);

/// Position of the basis element X_(ij) in the induce_sym2 basis.
std::size_t sym2_index(std::size_t i, std::size_t j, std::size_t m);
/// Symmetric m x m component matrix h_ij of a Sym^2 fiber vector, and back.
Eigen::MatrixXd sym2_to_matrix(const Eigen::VectorXd& coefficients, std::size_t m);
Eigen::VectorXd matrix_to_sym2(const Eigen::MatrixXd& h);

/// Row-major N x N matrix of fields.
using FieldMatrix = std::vector<ScalarField>;

/// Connection in the frame X'_b = sum_a X_a g^a_b:
/// omega' = g^{-1} omega g + g^{-1} dg.  `g_inverse` must be the inverse of g.
Connection gauge_transform(const Connection& conn, const FieldMatrix& g, const FieldMatrix& g_inverse);

Eigen::MatrixXd evaluate(const FieldMatrix& m, std::size_t n, std::span<const double> p);

}  // namespace dflag
