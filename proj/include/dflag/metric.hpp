#pragma once

// Is a tangent-bundle connection locally a metric connection?  It is exactly
// when Sym^2 T*M carries a parallel section that is positive definite, so run
// the derived flag on the induced connection and search the parallel sections
// for a positive-definite element.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dflag/bundle.hpp"
#include "dflag/flag.hpp"
#include "dflag/frobenius.hpp"

namespace dflag {

enum class Verdict { metric, not_metric, inconclusive };

std::string_view to_string(Verdict v);

struct MetricOptions {
  FlagOptions flag;
  AdaptedFrameOptions frame;
  IntegrationOptions integration;
  /// A witness whose section has a larger parallelism residual is not trusted.
  double residual_tolerance = 1e-5;
};

struct MetricReport {
  std::size_t rank = 0;                 // rank of the maximal flat subbundle of Sym^2
  Eigen::MatrixXd basis;                // its fiber at x0, one Sym^2 vector per column
  std::vector<SectionField> sections;   // parallel section through each basis column
  Verdict verdict = Verdict::inconclusive;
  std::optional<Eigen::VectorXd> coefficients;  // witness in terms of `basis`
  std::optional<Eigen::MatrixXd> witness;       // m x m metric at x0, largest eigenvalue 1
  double witness_residual = 0.0;                // parallelism residual of the witness section
  double witness_min_eigenvalue = 0.0;
  FlagReport flag;
};

/// Coefficients c with sum_k c_k T_k positive definite, if one is found.
/// One tensor: decided exactly from the eigenvalues of +T and -T.  Several:
/// deterministic low-discrepancy search over the unit sphere (4096 k samples)
/// maximising the smallest eigenvalue, then a local refinement.
std::optional<Eigen::VectorXd> find_positive_definite(std::span<const Eigen::MatrixXd> tensors);

/// Smallest eigenvalue of sum_k c_k T_k.
double min_eigenvalue(std::span<const Eigen::MatrixXd> tensors, const Eigen::VectorXd& c);

/// Throws IrregularPoint when x0 is not regular for the induced flag and
/// ShapeError when the connection is not on the tangent bundle.
MetricReport metric_check(const Connection& tm_conn, std::span<const double> x0,
                          const MetricOptions& options = {});

}  // namespace dflag
