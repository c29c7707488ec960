#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "dflag/bundle.hpp"
#include "dflag/chart.hpp"

namespace fixtures {

using namespace dflag;

// Round sphere on theta in [0.3, pi - 0.3], phi in [0, 3].
Chart sphere_chart(std::size_t n = 64);
Christoffel sphere_christoffel(const Chart& chart, bool perturbed = false);
Connection sphere_tangent(std::size_t n = 64, bool perturbed = false);
Connection sphere_sym2(std::size_t n = 64, bool perturbed = false);
// (1, sin^2 theta, 0)
Eigen::VectorXd sphere_generator(double theta);

Connection flat(std::size_t rank, std::size_t n = 24);

// nabla e1 = e2 x dy, nabla e2 = 0, nabla e3 = e1 dx over [0.2, 2]^2.
Connection derived_rank3(std::size_t n = 48);

// Shears g = prod (I + f_k E_{i_k j_k}) with smooth random f_k, and the inverse.
std::pair<FieldMatrix, FieldMatrix> random_gauge(std::uint64_t seed, std::size_t rank, const CoordList& coords,
                                                 double amplitude = 0.5);

// Block upper triangular connection [[0, B], [0, C]] with flat block of
// rank n, C = x D dy (D diagonal, entries in [1, 2]) so nothing outside the
// first n frame vectors is curvature-free, then a random shear gauge.
struct RandomConnection {
  std::uint64_t seed = 0;
  std::size_t flat_rank = 0;
  Connection base;       // before the gauge change; flat subbundle = span(e1..en)
  Connection conn;       // after it
  FieldMatrix g, g_inv;  // conn = gauge_transform(base, g, g_inv)
};
RandomConnection random_connection(std::uint64_t seed, std::size_t n = 28);

// Text of a random smooth coefficient: polynomial or trig in two coordinates.
std::string random_coefficient(std::uint64_t& state, double scale, const std::string& x = "x",
                               const std::string& y = "y");

}  // namespace fixtures
