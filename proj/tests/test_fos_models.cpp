#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fosemu/error.hpp"
#include "fosemu/fos_models.hpp"
#include "oracles.hpp"

using namespace fosemu;

namespace {

BSplineParams random_bspline(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> g(0.05, 3.0), w(5.0, 300.0), frac(0.0, 1.0);
    const double g1 = g(rng);
    return BSplineParams::from_constrained(g(rng), g1, g1 * std::max(frac(rng), 1e-3), w(rng), 0.1);
}

}  // namespace

TEST_CASE("quadratic curve values") {
    const auto p = QuadraticParams::from_constrained(1.0, 1.0, 100.0, 0.1);
    CHECK(eval_quadratic(p, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_quadratic(p, 50.0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(std::abs(eval_quadratic(p, 100.0)) < 1e-12);
    CHECK(eval_quadratic(p, 250.0) == 0.0);

    const auto q = QuadraticParams::from_constrained(2.0, 0.5, 80.0, 0.1);
    CHECK(std::abs(quadratic_polynomial(q, 80.0)) < 1e-14);
}

TEST_CASE("quadratic matches the expanded polynomial") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> g(0.05, 3.0), w(5.0, 300.0), u(0.0, 1.2);
    for (int i = 0; i < 500; ++i) {
        const double g0 = g(rng), g1 = g(rng), omega = w(rng), t = u(rng) * omega;
        const auto p = QuadraticParams::from_constrained(g0, g1, omega, 0.2);
        CHECK(eval_quadratic(p, t) == doctest::Approx(oracle::quadratic(g0, g1, omega, t)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("invalid curve inputs are rejected") {
    QuadraticParams p{0.0, 0.0, std::nan(""), 0.0};
    CHECK_THROWS_AS(eval_quadratic(p, 1.0), InvalidParameter);
    BSplineParams b{0.0, 0.0, std::numeric_limits<double>::infinity(), 1.0, 0.0};
    CHECK_THROWS_AS(eval_bspline(b, 1.0), InvalidParameter);
    CHECK_THROWS_AS(eval_bspline(BSplineParams{}, -1.0), InvalidParameter);
    CHECK_THROWS_AS(QuadraticParams::from_constrained(-1.0, 1.0, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("B-spline start, knot and end values") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_bspline(rng);
        const double k = p.knot();
        const double mid = 0.5 * (p.gamma1() + p.gamma2());
        CHECK(eval_bspline(p, 0.0) == p.gamma0());
        CHECK(std::abs(bspline_piece(p, 0, k) - mid) <= 1e-12 * std::max(1.0, mid));
        CHECK(std::abs(bspline_piece(p, 1, k) - mid) <= 1e-12 * std::max(1.0, mid));
        CHECK(std::abs(bspline_piece(p, 1, p.ttf())) < 1e-10);
        CHECK(eval_bspline(p, p.ttf()) == 0.0);
    }
    CHECK_THROWS_AS(bspline_piece(BSplineParams{}, 2, 0.0), InvalidParameter);
}

TEST_CASE("B-spline agrees with the expanded two-piece form") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_bspline(rng);
        const double t = u(rng) * p.ttf();
        CHECK(std::abs(eval_bspline(p, t) - oracle::spline(p.gamma0(), p.gamma1(), p.gamma2(), p.ttf(), t)) < 1e-10);
    }
}

TEST_CASE("knot vectors") {
    const KnotVector kv(10.0, 1);
    REQUIRE(kv.size() == 7);
    const double expected[] = {0, 0, 0, 5, 10, 10, 10};
    for (int i = 0; i < 7; ++i) CHECK(kv[i] == expected[i]);
    CHECK(kv.basis_count(2) == 4);
    CHECK(KnotVector(10.0, 0).size() == 6);
    CHECK_THROWS_AS(KnotVector(10.0, 2), InvalidParameter);
    CHECK_THROWS_AS(KnotVector(0.0, 1), InvalidParameter);
}

TEST_CASE("degree-zero basis is the interval indicator") {
    const KnotVector kv(1.0, 1);
    CHECK(bspline_basis(kv, 2, 0, 0.25) == 1.0);
    CHECK(bspline_basis(kv, 2, 0, 0.75) == 0.0);
    CHECK(bspline_basis(kv, 3, 0, 0.75) == 1.0);
    CHECK(bspline_basis(kv, 0, 0, 0.25) == 0.0);  // empty span [0, 0)
    CHECK_THROWS_AS(bspline_basis(kv, 6, 0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(bspline_basis(kv, 0, 3, 0.5), InvalidParameter);
    CHECK_THROWS_AS(bspline_basis(kv, -1, 1, 0.5), InvalidParameter);
}

TEST_CASE("recursion reproduces the closed forms") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> g(-2.0, 2.0), u(0.0, 1.0);
    const KnotVector unit(1.0, 1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double c[] = {g(rng), g(rng), g(rng), g(rng)};
        const double t = u(rng);
        const double rec = bspline_combination(unit, c, t);
        worst = std::max(worst, std::abs(rec - oracle::spline_general(c[0], c[1], c[2], c[3], 1.0, t)));
    }
    CHECK(worst < 1e-10);

    worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_bspline(rng);
        const KnotVector kv(p.ttf(), 1);
        const double c[] = {p.gamma0(), p.gamma1(), p.gamma2(), 0.0};
        const double t = u(rng) * p.ttf();
        worst = std::max(worst, std::abs(bspline_combination(kv, c, t) - eval_bspline(p, t)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("basis functions sum to one") {
    const KnotVector kv(37.0, 1);
    for (int i = 0; i < 200; ++i) {
        const double t = 37.0 * i / 200.0;
        double sum = 0.0;
        for (int l = 0; l < kv.basis_count(2); ++l) sum += bspline_basis(kv, l, 2, t);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }
    const KnotVector plain(37.0, 0);
    double sum = 0.0;
    for (int l = 0; l < plain.basis_count(2); ++l) sum += bspline_basis(plain, l, 2, 12.0);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("monotonicity constraint") {
    const auto ok = BSplineParams::from_constrained(1.0, 1.0, 0.5, 100.0, 0.1);
    CHECK(check_constraints(ok).ok);
    CHECK(*check_constraints(ok).knot_slope < 0.0);

    const auto bad = BSplineParams::from_constrained(1.0, 0.5, 1.0, 100.0, 0.1);
    const auto r = check_constraints(bad);
    CHECK_FALSE(r.ok);
    REQUIRE(r.violations.size() == 1);
    CHECK(*r.knot_slope == doctest::Approx(2.0 * 0.5 / 100.0));

    const auto edge = BSplineParams::from_constrained(1.0, 0.7, 0.7, 100.0, 0.1);
    CHECK(check_constraints(edge).ok);
    CHECK(*check_constraints(edge).knot_slope == 0.0);

    CHECK(check_constraints(QuadraticParams::from_constrained(1.0, 2.0, 3.0, 4.0)).ok);
    CHECK_FALSE(check_constraints(QuadraticParams{0.0, 0.0, std::nan(""), 0.0}).ok);
}

TEST_CASE("constrained curves are positive before omega and non-increasing after the knot") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_bspline(rng);
        double prev = std::numeric_limits<double>::infinity();
        for (int j = 1; j < 200; ++j) {
            const double t = p.ttf() * j / 200.0;
            const double g = eval_bspline(p, t);
            REQUIRE(g > 0.0);
            if (t >= p.knot()) {
                CHECK(g <= prev + 1e-12);
                prev = g;
            }
        }
    }
}

TEST_CASE("B-spline collapses to the quadratic") {
    const auto p = BSplineParams::from_constrained(1.0, 1.0, 0.5, 100.0, 0.1);
    const auto q = collapse_to_quadratic(p);
    REQUIRE(q.has_value());
    CHECK(q->gamma0() == doctest::Approx(1.0));
    CHECK(q->gamma1() == doctest::Approx(1.0));
    CHECK(q->ttf() == doctest::Approx(100.0));
    CHECK_FALSE(collapse_to_quadratic(BSplineParams::from_constrained(1.0, 1.0, 0.4, 100.0, 0.1)).has_value());

    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> g(0.1, 3.0), w(5.0, 300.0);
    for (int i = 0; i < 200; ++i) {
        const double g0 = g(rng);
        const double g1 = 0.5 * g0 + g(rng);
        const auto b = BSplineParams::from_constrained(g0, g1, g1 - 0.5 * g0, w(rng), 0.1);
        const auto c = collapse_to_quadratic(b);
        REQUIRE(c.has_value());
        for (int j = 0; j <= 200; ++j) {
            const double t = b.ttf() * j / 200.0;
            CHECK(std::abs(eval_quadratic(*c, t) - eval_bspline(b, t)) < 1e-12);
        }
    }
}

TEST_CASE("variant helpers and hot-path gradients") {
    const CurveParams q = QuadraticParams::from_constrained(1.5, 0.8, 60.0, 0.05);
    const CurveParams b = BSplineParams::from_constrained(1.5, 0.8, 0.3, 60.0, 0.05);
    CHECK(model_of(q) == ModelKind::quadratic);
    CHECK(model_of(b) == ModelKind::bspline);
    CHECK(curve_ttf(b) == doctest::Approx(60.0));
    CHECK(curve_noise_sd(q) == doctest::Approx(0.05));
    const double lat[] = {0.1, -0.2, -0.9, 4.0, -3.0};
    CHECK(eval_curve(curve_from_latents(ModelKind::bspline, lat), 10.0) ==
          doctest::Approx(eval_bspline(BSplineParams{0.1, -0.2, -0.9, 4.0, -3.0}, 10.0)));
    CHECK_THROWS_AS(curve_from_latents(ModelKind::quadratic, lat), InvalidParameter);

    for (ModelKind kind : {ModelKind::quadratic, ModelKind::bspline}) {
        const std::vector<double> shape = kind == ModelKind::quadratic ? std::vector<double>{0.3, -0.1, 4.2}
                                                                        : std::vector<double>{0.3, -0.1, -0.6, 4.2};
        for (double t : {3.0, 20.0, 31.0, 45.0, 60.0}) {
            std::vector<double> grad(shape.size());
            const double v = curve_value_and_gradient(kind, shape, t, grad);
            CHECK(v == doctest::Approx(curve_value(kind, shape, t)));
            const auto fd = oracle::finite_difference([&](const std::vector<double>& x) { return curve_value(kind, x, t); },
                                                      shape, 1e-6);
            for (std::size_t k = 0; k < shape.size(); ++k) CHECK(grad[k] == doctest::Approx(fd[k]).epsilon(1e-6));
        }
    }
    CHECK(to_string(parse_model_kind("quadratic")) == "quadratic");
    CHECK_THROWS_AS(parse_model_kind("cubic"), InvalidParameter);
}
