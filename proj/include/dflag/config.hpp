#pragma once

// Job description read from an INI-style file:
//
//   [chart]        coords = theta, phi / lower = ... / upper = ... / grid = 64
//   [connection]   source = christoffel | omega, bundle = tangent | sym2, rank = N,
//                  Gamma[i][mu][j] = "expr"   (Gamma^i_{mu j}, coordinate names)
//                  omega[i][j][mu] = "expr"   (omega^i_j(d_mu), i, j from 1)
//   [tolerances]   tau_rank, tau_stab, residual, fd_order
//   [base]         point = ...
//   [transport]    path = p1 | p2 | ..., vector = ..., steps = 0
//
// Numbers may be constant expressions (pi/2, sin(1)^2, ...).

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dflag/bundle.hpp"
#include "dflag/chart.hpp"
#include "dflag/error.hpp"

namespace dflag {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ConnectionSource { christoffel, omega };
enum class BundleKind { tangent, sym2 };

struct Tolerances {
  double tau_rank = 1e-8;
  double tau_stab = 1e-6;
  double residual = 1e-5;
  int fd_order = kDefaultFdOrder;
};

struct CoefficientEntry {
  std::vector<std::size_t> index;  // (i, mu, j) for Gamma, (i, j, mu) for omega; 0-based
  std::string expression;
};

struct JobConfig {
  std::string name;
  std::vector<std::string> coords;
  std::vector<double> lower, upper;
  std::vector<std::size_t> grid;

  ConnectionSource source = ConnectionSource::christoffel;
  BundleKind bundle = BundleKind::tangent;
  std::size_t rank = 0;  // fiber rank for source = omega
  std::vector<CoefficientEntry> entries;

  Tolerances tolerances;
  Point base;

  std::vector<Point> path;
  std::optional<Eigen::VectorXd> transport_vector;
  std::size_t transport_steps = 0;

  Chart chart() const;
  /// Tangent connection from the Christoffel table; ConfigError for source = omega.
  Connection tangent_connection() const;
  /// The connection the analyses run on: omega table, tangent, or induced Sym^2.
  Connection connection() const;
  std::size_t fiber_rank() const;
};

/// Throws ConfigError (or ParseError for a bad expression).
JobConfig parse_config(std::string_view text, std::string name = "job");
JobConfig load_config(const std::filesystem::path& path);

std::string_view to_string(ConnectionSource s);
std::string_view to_string(BundleKind b);

}  // namespace dflag
