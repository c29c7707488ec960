#include "fixtures.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

namespace fixtures {

Chart sphere_chart(std::size_t n) {
  const double pi = std::numbers::pi;
  return Chart({"theta", "phi"}, {0.3, 0.0}, {pi - 0.3, 3.0}, {n, n});
}

Christoffel sphere_christoffel(const Chart& chart, bool perturbed) {
  auto c = chart.coords();
  Christoffel g(8, ScalarField::constant(0.0, c));
  const std::string cot = perturbed ? "cot(theta) + theta" : "cot(theta)";
  g[(0 * 2 + 1) * 2 + 1] = parse_scalar_field("-sin(theta)*cos(theta)", c);
  g[(1 * 2 + 0) * 2 + 1] = parse_scalar_field(cot, c);
  g[(1 * 2 + 1) * 2 + 0] = parse_scalar_field(cot, c);
  return g;
}

Connection sphere_tangent(std::size_t n, bool perturbed) {
  Chart chart = sphere_chart(n);
  return connection_from_christoffel(sphere_christoffel(chart, perturbed), chart);
}

Connection sphere_sym2(std::size_t n, bool perturbed) { return induce_sym2(sphere_tangent(n, perturbed)); }

Eigen::VectorXd sphere_generator(double theta) {
  Eigen::VectorXd v(3);
  v << 1.0, std::pow(std::sin(theta), 2), 0.0;
  return v;
}

Connection flat(std::size_t rank, std::size_t n) {
  return Connection::zero(Chart({"x", "y"}, {0.0, 0.0}, {1.0, 1.0}, {n, n}), rank);
}

Connection derived_rank3(std::size_t n) {
  Chart chart({"x", "y"}, {0.2, 0.2}, {2.0, 2.0}, {n, n});
  auto c = chart.coords();
  std::vector<ScalarField> omega(3 * 3 * 2, ScalarField::constant(0.0, c));
  omega[(1 * 3 + 0) * 2 + 1] = ScalarField::coordinate(0, c);    // omega^2_1(dy) = x
  omega[(0 * 3 + 2) * 2 + 0] = ScalarField::constant(1.0, c);    // omega^1_3(dx) = 1
  return Connection(chart, 3, std::move(omega));
}

namespace {

std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  return v < 0 ? "(" + s + ")" : s;
}

double uniform(std::uint64_t& state, double lo, double hi) {
  std::mt19937_64 gen(state);
  state = gen();
  return lo + (hi - lo) * double(state >> 11) * 0x1.0p-53;
}

}  // namespace

std::string random_coefficient(std::uint64_t& state, double scale, const std::string& x, const std::string& y) {
  const int kind = static_cast<int>(uniform(state, 0.0, 4.0));
  const double a = scale * uniform(state, -1.0, 1.0);
  const double b = uniform(state, -1.5, 1.5), c = uniform(state, -1.5, 1.5), d = uniform(state, -1.0, 1.0);
  switch (kind) {
    case 0: return num(a) + "*sin(" + num(b) + "*" + x + " + " + num(c) + "*" + y + " + " + num(d) + ")";
    case 1: return num(a) + "*" + x + "^2 + " + num(scale * b / 2) + "*" + x + "*" + y + " + " + num(scale * c / 2) + "*" + y;
    case 2: return num(a) + "*cos(" + num(b) + "*" + x + "*" + y + ") + " + num(scale * d / 2) + "*" + x;
    default: return num(a) + "*exp(" + num(b / 2) + "*" + x + ") * " + y + " + " + num(scale * c / 3) + "*" + y + "^3";
  }
}

std::pair<FieldMatrix, FieldMatrix> random_gauge(std::uint64_t seed, std::size_t rank, const CoordList& coords,
                                                 double amplitude) {
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ull + 17;
  auto identity = [&] {
    FieldMatrix id(rank * rank, ScalarField::constant(0.0, coords));
    for (std::size_t i = 0; i < rank; ++i) id[i * rank + i] = ScalarField::constant(1.0, coords);
    return id;
  };
  auto multiply = [&](const FieldMatrix& a, const FieldMatrix& b) {
    FieldMatrix out(rank * rank, ScalarField::constant(0.0, coords));
    for (std::size_t i = 0; i < rank; ++i)
      for (std::size_t j = 0; j < rank; ++j)
        for (std::size_t k = 0; k < rank; ++k)
          if (!a[i * rank + k].is_zero() && !b[k * rank + j].is_zero())
            out[i * rank + j] += a[i * rank + k] * b[k * rank + j];
    return out;
  };
  FieldMatrix g = identity(), g_inv = identity();
  const std::size_t shears = rank + 1;
  for (std::size_t s = 0; s < shears; ++s) {
    std::size_t i = static_cast<std::size_t>(uniform(state, 0.0, double(rank))) % rank;
    std::size_t j = (i + 1 + static_cast<std::size_t>(uniform(state, 0.0, double(rank - 1)))) % rank;
    ScalarField f = parse_scalar_field(random_coefficient(state, amplitude, (*coords)[0], (*coords)[1]), coords);
    FieldMatrix e = identity(), e_inv = identity();
    e[i * rank + j] = f;
    e_inv[i * rank + j] = -f;
    g = multiply(g, e);
    g_inv = multiply(e_inv, g_inv);
  }
  return {std::move(g), std::move(g_inv)};
}

RandomConnection random_connection(std::uint64_t seed, std::size_t n) {
  std::uint64_t state = seed + 1;
  const std::size_t rank = 2 + static_cast<std::size_t>(uniform(state, 0.0, 3.0)) % 3;
  const std::size_t flat_rank = 1 + static_cast<std::size_t>(uniform(state, 0.0, double(rank - 1))) % (rank - 1);
  Chart chart({"x", "y"}, {0.2, 0.2}, {1.2, 1.2}, {n, n});
  auto c = chart.coords();
  std::vector<ScalarField> omega(rank * rank * 2, ScalarField::constant(0.0, c));
  auto at = [&](std::size_t i, std::size_t j, std::size_t mu) -> ScalarField& { return omega[(i * rank + j) * 2 + mu]; };
  for (std::size_t i = 0; i < flat_rank; ++i)
    for (std::size_t j = flat_rank; j < rank; ++j)
      for (std::size_t mu = 0; mu < 2; ++mu) at(i, j, mu) = parse_scalar_field(random_coefficient(state, 1.0), c);
  for (std::size_t j = flat_rank; j < rank; ++j)
    at(j, j, 1) = uniform(state, 1.0, 2.0) * ScalarField::coordinate(0, c);
  // a little upper-triangular coupling inside the curved block
  for (std::size_t i = flat_rank; i < rank; ++i)
    for (std::size_t j = i + 1; j < rank; ++j) at(i, j, 0) = parse_scalar_field(random_coefficient(state, 0.5), c);

  RandomConnection out{seed, flat_rank, Connection(chart, rank, omega), Connection::zero(chart, rank), {}, {}};
  std::tie(out.g, out.g_inv) = random_gauge(seed, rank, c);
  out.conn = gauge_transform(out.base, out.g, out.g_inv);
  return out;
}

}  // namespace fixtures
