#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dflag/error.hpp"
#include "dflag/flag.hpp"
#include "fixtures.hpp"

using namespace dflag;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// rank 2 for x < 0, rank 1 for x >= 0
SubbundleField rank_jump_field(const Chart& chart) {
  std::vector<Subspace> fibers;
  for (std::size_t k = 0; k < chart.size(); ++k)
    fibers.push_back(chart.point(k)[0] < 0 ? Subspace::span(Eigen::MatrixXd::Identity(3, 2))
                                           : Subspace::span(vec({1, 0, 0})));
  return SubbundleField(chart, fibers, std::vector<char>(chart.size(), 1));
}

// Rank-2 bundle whose curvature x E12 vanishes on the line x = 0 only.
Connection curvature_line() {
  Chart chart({"x", "y"}, {-1.0, -1.0}, {1.0, 1.0}, {21, 21});
  auto c = chart.coords();
  std::vector<ScalarField> omega(8, ScalarField::constant(0.0, c));
  omega[(0 * 2 + 1) * 2 + 1] = parse_scalar_field("x^2/2", c);
  return Connection(chart, 2, omega);
}

struct NamedConnection {
  std::string name;
  Connection conn;
};

std::vector<NamedConnection> all_fixtures() {
  std::vector<NamedConnection> out{{"sphere", fixtures::sphere_sym2(32)},
                                   {"flat", fixtures::flat(4, 16)},
                                   {"derived", fixtures::derived_rank3(32)},
                                   {"perturbed", fixtures::sphere_sym2(64, true)}};
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    out.push_back({"random " + std::to_string(seed), fixtures::random_connection(seed, 20).conn});
  return out;
}

}  // namespace

TEST_CASE("subspaces and principal angles") {
  Subspace a = Subspace::span(vec({1, 0, 0}));
  Subspace b = Subspace::span(vec({1, 1, 0}));
  CHECK(max_principal_angle(a, b) == doctest::Approx(kPi / 4));
  CHECK(max_principal_angle(a, Subspace::full(3)) == doctest::Approx(kPi / 2));
  CHECK(containment_angle(a, Subspace::full(3)) == doctest::Approx(0.0));
  CHECK(containment_angle(b, a) == doctest::Approx(kPi / 4));
  CHECK(distance_to(vec({0, 3, 4}), a) == doctest::Approx(5.0));
  Subspace s = Subspace::span((Eigen::MatrixXd(3, 3) << 1, 2, 3, 0, 0, 0, 1, 2, 3).finished());
  CHECK(s.rank() == 1);
  CHECK((s.basis.transpose() * s.basis - Eigen::MatrixXd::Identity(1, 1)).norm() < 1e-12);
}

TEST_CASE("common kernel") {
  SUBCASE("zero matrices give the full space") {
    std::vector<Eigen::MatrixXd> z{Eigen::MatrixXd::Zero(3, 3)};
    CHECK(common_kernel(z, 1e-8).rank() == 3);
  }
  SUBCASE("sphere at theta = pi/3: X1 + (3/4) X2") {
    Connection sym = fixtures::sphere_sym2(8);
    std::vector<Eigen::MatrixXd> r{curvature(sym, 0, 1, Point{kPi / 3, 1.0})};
    Subspace k = common_kernel(r, 1e-8);
    REQUIRE(k.rank() == 1);
    CHECK(max_principal_angle(k, Subspace::span(vec({1, 0.75, 0}))) < 1e-12);
  }
  SUBCASE("derived rank-3 at x = 0.5: span{e2, 0.5 e1 + e3}") {
    Connection d = fixtures::derived_rank3(8);
    std::vector<Eigen::MatrixXd> r{curvature(d, 0, 1, Point{0.5, 1.0})};
    Subspace k = common_kernel(r, 1e-8);
    Eigen::MatrixXd expect(3, 2);
    expect << 0, 0.5, 1, 0, 0, 1;
    REQUIRE(k.rank() == 2);
    CHECK(max_principal_angle(k, Subspace::span(expect)) < 1e-12);
  }
  SUBCASE("round-off on a vanishing matrix is not rank") {
    std::vector<Eigen::MatrixXd> tiny{Eigen::MatrixXd::Constant(2, 2, 1e-17)};
    CHECK(common_kernel(tiny, 1e-8, 1.0).rank() == 2);
    CHECK(common_kernel(tiny, 1e-8).rank() == 1);
  }
  SUBCASE("several matrices intersect") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3), b = Eigen::MatrixXd::Zero(3, 3);
    a(0, 0) = 1;
    b(1, 1) = 2;
    std::vector<Eigen::MatrixXd> ms{a, b};
    Subspace k = common_kernel(ms, 1e-8);
    REQUIRE(k.rank() == 1);
    CHECK(std::abs(k.basis(2, 0)) == doctest::Approx(1.0));
  }
}

TEST_CASE("smooth refinement") {
  SUBCASE("constant rank is left alone") {
    Chart chart({"x", "y"}, {0, 0}, {1, 1}, {6, 6});
    std::vector<Subspace> f(chart.size(), Subspace::span(vec({1, 1, 0})));
    SubbundleField r = smooth_refine(SubbundleField(chart, f, std::vector<char>(chart.size(), 1)));
    CHECK(r.regular_count() == chart.size());
    CHECK(max_principal_angle(r.fiber(7), f[7]) < 1e-12);
  }
  SUBCASE("rank jump: the high-rank side next to the jump is excluded") {
    Chart chart({"x", "y"}, {-1.05, 0}, {0.95, 1}, {21, 5});
    SubbundleField r = smooth_refine(rank_jump_field(chart));
    for (std::size_t k = 0; k < chart.size(); ++k) {
      const double x = chart.point(k)[0];
      const bool next_to_jump = x < 0 && x > -0.15;
      CHECK(r.is_regular(k) == !next_to_jump);
      if (r.is_regular(k)) CHECK(r.fiber(k).rank() == (x < 0 ? 2u : 1u));
    }
  }
  SUBCASE("sphere V(0) has rank 1 everywhere") {
    FlagReport rep = derived_flag(fixtures::sphere_sym2(32));
    CHECK(rep.stages[0].regular_count() == rep.stages[0].chart().size());
    CHECK(rep.stages[0].min_rank() == 1);
    CHECK(rep.stages[0].max_rank() == 1);
  }
}

TEST_CASE("gauge alignment") {
  SUBCASE("constant subspace gives a constant frame") {
    Chart chart({"x", "y"}, {0, 0}, {1, 1}, {7, 7});
    Eigen::MatrixXd b(3, 2);
    b << 1, 0, 1, 1, 0, 1;
    std::vector<Subspace> f(chart.size(), Subspace::span(b));
    FrameField fr = gauge_align(SubbundleField(chart, f, std::vector<char>(chart.size(), 1)), 24);
    for (std::size_t k = 0; k < chart.size(); ++k) CHECK((fr.frames[k] - fr.frames[24]).norm() < 1e-14);
  }
  SUBCASE("rotating line field follows (cos x, sin x) with a fixed sign") {
    Chart chart({"x", "y"}, {0, 0}, {3, 1}, {61, 4});
    std::vector<Subspace> f;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      double x = chart.point(k)[0];
      f.push_back(Subspace::span(vec({std::cos(x), std::sin(x)}) * (k % 2 ? -1.0 : 1.0)));
    }
    FrameField fr = gauge_align(SubbundleField(chart, f, std::vector<char>(chart.size(), 1)), 0);
    const double sign = fr.frames[0](0, 0) > 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      double x = chart.point(k)[0];
      CHECK((fr.frames[k].col(0) - sign * vec({std::cos(x), std::sin(x)})).norm() < 1e-12);
    }
  }
  SUBCASE("sphere W(0): frame proportional to (1, sin^2, 0), neighbours O(h) apart") {
    FlagReport rep = derived_flag(fixtures::sphere_sym2(32));
    const Chart& chart = rep.stages[0].chart();
    FrameField fr = gauge_align(rep.stages[0], chart.size() / 2);
    const double h = chart.spacing(0);
    for (std::size_t k = 0; k < chart.size(); ++k) {
      Eigen::VectorXd v = fixtures::sphere_generator(chart.point(k)[0]).normalized();
      CHECK(std::abs(std::abs(v.dot(fr.frames[k].col(0))) - 1.0) < 1e-12);
      if (chart.axis_index(k, 0) + 1 < chart.count(0))
        CHECK((fr.frames[k] - fr.frames[k + chart.stride(0)]).norm() < 2 * h);
    }
  }
  SUBCASE("a quarter turn between neighbours is an alignment failure") {
    Chart chart({"x"}, {0.0}, {1.0}, {5});
    std::vector<Subspace> f{Subspace::span(vec({1, 0})), Subspace::span(vec({1, 0})), Subspace::span(vec({0, 1})),
                            Subspace::span(vec({0, 1})), Subspace::span(vec({0, 1}))};
    FrameField fr = gauge_align(SubbundleField(chart, f, std::vector<char>(5, 1)), 0);
    CHECK_FALSE(fr.valid[2]);
    CHECK(fr.failures.size() >= 1);
  }
}

TEST_CASE("second fundamental form") {
  SUBCASE("sphere W(0) is preserved") {
    // alpha is pure truncation error: bounded by the estimate at 32, small at 64
    for (std::size_t n : {32u, 64u}) {
    Connection c = fixtures::sphere_sym2(n);
    FlagReport rep = derived_flag(c);
    const Chart& chart = rep.stages[0].chart();
    FrameField fr = gauge_align(rep.stages[0], chart.size() / 2);
    for (std::size_t k = 0; k < chart.size(); k += 13) {
      auto sff = second_fundamental_form(c, fr, k);
      CHECK(sff.alpha.cwiseAbs().maxCoeff() <= sff.error.norm());
      if (n == 64) CHECK(sff.alpha.cwiseAbs().maxCoeff() < 1e-6);
      CHECK(sff_kernel(sff, fr.frames[k], 1e-8).rank() == 1);
    }
    }
  }
  SUBCASE("constant frame of the zero connection") {
    Connection z = fixtures::flat(3, 6);
    FrameField fr{z.chart(), std::vector<Eigen::MatrixXd>(z.chart().size(), Eigen::MatrixXd::Identity(3, 3).leftCols(2)),
                  std::vector<char>(z.chart().size(), 1), {}};
    auto sff = second_fundamental_form(z, fr, 14);
    CHECK(sff.alpha.isZero(0.0));
  }
  SUBCASE("derived rank-3 frame {e2, x e1 + e3}: alpha = 2 (e1 mod W') dx") {
    Connection d = fixtures::derived_rank3(32);
    const Chart& chart = d.chart();
    std::vector<Eigen::MatrixXd> frames;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      Eigen::MatrixXd f(3, 2);
      f << 0, chart.point(k)[0], 1, 0, 0, 1;
      frames.push_back(f);
    }
    FrameField fr{chart, frames, std::vector<char>(chart.size(), 1), {}};
    for (std::size_t k : {std::size_t{100}, std::size_t{500}, std::size_t{900}}) {
      const double x = chart.point(k)[0];
      auto sff = second_fundamental_form(d, fr, k);
      // complement is the unit normal (1, 0, -x)/sqrt(1 + x^2); blocks stacked (dx, dy)
      REQUIRE(sff.alpha.rows() == 2);
      CHECK(std::abs(sff.alpha(0, 0)) < 1e-9);
      CHECK(std::abs(sff.alpha(0, 1)) == doctest::Approx(2 / std::sqrt(1 + x * x)).epsilon(1e-9));
      CHECK(sff.alpha.row(1).cwiseAbs().maxCoeff() < 1e-9);
      Subspace ker = sff_kernel(sff, frames[k], 1e-8);
      REQUIRE(ker.rank() == 1);
      CHECK(max_principal_angle(ker, Subspace::span(vec({0, 1, 0}))) < 1e-9);
    }
  }
  SUBCASE("kernel of a zero or generic alpha") {
    SecondFundamentalForm zero;
    zero.alpha = Eigen::MatrixXd::Zero(4, 2);
    zero.error = Eigen::MatrixXd::Zero(4, 2);
    zero.complement = Eigen::MatrixXd::Identity(4, 2);
    zero.reference_scale = 1.0;
    Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(4, 4).rightCols(2);
    CHECK(sff_kernel(zero, frame, 1e-8).rank() == 2);
    std::mt19937 rng(2);
    std::normal_distribution<double> n;
    SecondFundamentalForm generic = zero;
    generic.alpha = Eigen::MatrixXd::NullaryExpr(4, 2, [&] { return n(rng); });
    CHECK(sff_kernel(generic, frame, 1e-8).rank() == 0);
  }
  SUBCASE("rescaling the frame does not move the kernel") {
    Connection d = fixtures::derived_rank3(32);
    FlagReport rep = derived_flag(d);
    const Chart& chart = d.chart();
    FrameField fr = gauge_align(rep.stages[0], chart.size() / 2);
    FrameField scaled = fr;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      Point p = chart.point(k);
      scaled.frames[k] *= 1.0 + 0.5 * std::sin(p[0] + 2 * p[1]);
    }
    for (std::size_t k = 40; k < chart.size(); k += 97) {
      if (!fr.valid[k]) continue;
      Subspace a = sff_kernel(second_fundamental_form(d, fr, k), fr.frames[k], 1e-8);
      Subspace b = sff_kernel(second_fundamental_form(d, scaled, k), scaled.frames[k], 1e-8);
      CHECK(a.rank() == b.rank());
      CHECK(max_principal_angle(a, b) < 1e-9);
    }
  }
}

TEST_CASE("derived flag on the fixtures") {
  SUBCASE("sphere: ranks 1, 1") {
    FlagReport rep = derived_flag(fixtures::sphere_sym2(64));
    CHECK(rep.ranks == std::vector<std::size_t>{1, 1});
    CHECK(rep.converged);
    CHECK(rep.regular_fraction() == 1.0);
  }
  SUBCASE("zero connection: W after one iteration") {
    for (std::size_t n : {1u, 2u, 5u}) {
      FlagReport rep = derived_flag(fixtures::flat(n, 10));
      CHECK(rep.ranks == std::vector<std::size_t>{n, n});
      CHECK(rep.iterations == 1);
    }
  }
  SUBCASE("derived rank-3: ranks 2, 1, 1 and W~ = span{e2}") {
    FlagReport rep = derived_flag(fixtures::derived_rank3(48));
    CHECK(rep.ranks == std::vector<std::size_t>{2, 1, 1});
    const auto& w = rep.flat();
    for (std::size_t k = 0; k < w.chart().size(); ++k)
      if (w.is_regular(k)) CHECK(max_principal_angle(w.fiber(k), Subspace::span(vec({0, 1, 0}))) < 1e-8);
  }
  SUBCASE("perturbed sphere: ranks 1, 0") {
    FlagReport rep = derived_flag(fixtures::sphere_sym2(64, true));
    CHECK(rep.ranks == std::vector<std::size_t>{1, 0});
    CHECK(rep.rank_final() == 0);
  }
  SUBCASE("one-dimensional chart: no curvature, W~ = W") {
    Chart chart({"x"}, {0.0}, {1.0}, {20});
    Connection c(chart, 2, std::vector<ScalarField>(4, parse_scalar_field("x", chart.coords())));
    CHECK(derived_flag(c).ranks == std::vector<std::size_t>{2, 2});
  }
  SUBCASE("singular coefficients on the lattice") {
    Chart chart({"theta", "phi"}, {0.0, 0.0}, {1.0, 1.0}, {5, 5});
    Connection c = induce_sym2(connection_from_christoffel(fixtures::sphere_christoffel(chart), chart));
    CHECK_THROWS_AS(derived_flag(c), NumericalError);
  }
}

TEST_CASE("regularity") {
  SUBCASE("sphere interior point") {
    FlagReport rep = derived_flag(fixtures::sphere_sym2(32));
    CHECK(is_regular(rep, Point{kPi / 2, 1.0}));
    CHECK_THROWS_AS(is_regular(rep, Point{0.1, 1.0}), std::out_of_range);
  }
  SUBCASE("zero connection: everywhere") {
    FlagReport rep = derived_flag(fixtures::flat(3, 8));
    for (std::size_t k = 0; k < 64; ++k) CHECK(is_regular(rep, k));
  }
  SUBCASE("curvature vanishing on a line makes the line irregular") {
    FlagReport rep = derived_flag(curvature_line());
    CHECK(rep.ranks == std::vector<std::size_t>{1, 1});
    CHECK_FALSE(is_regular(rep, Point{0.0, 0.3}));
    CHECK_FALSE(is_regular(rep, Point{0.1, 0.3}));
    CHECK(is_regular(rep, Point{0.5, 0.3}));
    CHECK_FALSE(rep.irregular.empty());
  }
  SUBCASE("synthetic rank jump") {
    Chart chart({"x", "y"}, {-1.05, 0}, {0.95, 1}, {21, 5});
    FlagReport rep;
    rep.stages.push_back(smooth_refine(rank_jump_field(chart)));
    rep.ranks = {2};
    CHECK_FALSE(is_regular(rep, Point{-0.05, 0.5}));
    CHECK_FALSE(is_regular(rep, Point{0.05, 0.5}));
    CHECK(is_regular(rep, Point{0.5, 0.5}));
    CHECK(is_regular(rep, Point{-0.6, 0.5}));
  }
}

TEST_CASE("flag properties on all fixtures") {
  for (const auto& [name, conn] : all_fixtures()) {
    CAPTURE(name);
    FlagReport rep = derived_flag(conn);
    // monotone, bounded
    for (std::size_t i = 1; i < rep.ranks.size(); ++i) CHECK(rep.ranks[i] <= rep.ranks[i - 1]);
    CHECK(rep.iterations <= conn.rank() + 1);
    CHECK(rep.converged);
    // nesting
    for (std::size_t i = 1; i < rep.stages.size(); ++i)
      for (std::size_t k = 0; k < conn.chart().size(); ++k)
        if (rep.stages[i].is_regular(k) && rep.stages[i - 1].is_regular(k))
          CHECK(containment_angle(rep.stages[i].fiber(k), rep.stages[i - 1].fiber(k)) < 1e-8);
    // threshold robustness
    for (double tau : {1e-7, 1e-9}) {
      FlagOptions o;
      o.tau_rank = tau;
      CHECK(derived_flag(conn, o).ranks == rep.ranks);
    }
  }
}

TEST_CASE("rank sequence and flat subbundle are gauge invariant") {
  std::vector<NamedConnection> cases{{"sphere", fixtures::sphere_sym2(32)}, {"derived", fixtures::derived_rank3(48)}};
  for (std::uint64_t seed = 0; seed < 6; ++seed) cases.push_back({"random", fixtures::random_connection(seed, 20).base});
  std::uint64_t gauge_seed = 1000;
  for (const auto& [name, conn] : cases) {
    CAPTURE(name);
    auto [g, g_inv] = fixtures::random_gauge(gauge_seed++, conn.rank(), conn.chart().coords(), 0.3);
    Connection t = gauge_transform(conn, g, g_inv);
    FlagReport a = derived_flag(conn), b = derived_flag(t);
    CHECK(a.ranks == b.ranks);
    const Chart& chart = conn.chart();
    double worst = 0;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      if (!a.flat().is_regular(k) || !b.flat().is_regular(k) || a.flat().fiber(k).rank() == 0) continue;
      Eigen::MatrixXd gi = evaluate(g_inv, conn.rank(), chart.point(k));
      worst = std::max(worst, max_principal_angle(b.flat().fiber(k), Subspace::span(gi * a.flat().fiber(k).basis)));
    }
    CHECK(worst < 1e-6);
  }
}
