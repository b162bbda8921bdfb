#include "fosemu/fos_models.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <type_traits>

#include "fosemu/error.hpp"

namespace fosemu {

std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::quadratic ? "quadratic" : "bspline";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "quadratic") return ModelKind::quadratic;
    if (text == "bspline") return ModelKind::bspline;
    throw InvalidParameter(fmt::format("unknown model '{}': expected quadratic or bspline", text));
}

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidParameter(fmt::format("{} is not finite", what));
}

void require_time(double t) {
    if (!(t >= 0.0)) throw InvalidParameter(fmt::format("time must be >= 0, got {}", t));
}

// Curves are written in s = t / omega. Bernstein-like factored forms keep the
// zero at s = 1 exact.
//   quadratic: g0 (1-s)^2 + 2 g1 s (1-s)
//   piece 0:   g0 (1-2s)^2 + 2 g1 s (2-3s) + 2 g2 s^2
//   piece 1:   2 (1-s) [g1 (1-s) - g2 (1-3s)]
inline double quad_poly(double g0, double g1, double s) {
    const double r = 1.0 - s;
    return g0 * r * r + 2.0 * g1 * s * r;
}

inline double piece0(double g0, double g1, double g2, double s) {
    const double a = 1.0 - 2.0 * s;
    return g0 * a * a + 2.0 * g1 * s * (2.0 - 3.0 * s) + 2.0 * g2 * s * s;
}

inline double piece1(double g1, double g2, double s) {
    const double r = 1.0 - s;
    return 2.0 * r * (g1 * r - g2 * (1.0 - 3.0 * s));
}

}  // namespace

QuadraticParams QuadraticParams::from_constrained(double gamma0, double gamma1, double ttf,
                                                  double noise_sd) {
    if (!(gamma0 > 0 && gamma1 > 0 && ttf > 0 && noise_sd > 0))
        throw InvalidParameter("quadratic parameters must be strictly positive");
    return {std::log(gamma0), std::log(gamma1), std::log(ttf), std::log(noise_sd)};
}

BSplineParams BSplineParams::from_constrained(double gamma0, double gamma1, double gamma2, double ttf,
                                              double noise_sd) {
    if (!(gamma0 > 0 && gamma1 > 0 && gamma2 > 0 && ttf > 0 && noise_sd > 0))
        throw InvalidParameter("B-spline parameters must be strictly positive");
    return {std::log(gamma0), std::log(gamma1), std::log(gamma2), std::log(ttf), std::log(noise_sd)};
}

double quadratic_polynomial(const QuadraticParams& p, double t) {
    require_finite(p.a0, "A0");
    require_finite(p.a1, "A1");
    require_finite(p.omega, "Omega");
    return quad_poly(p.gamma0(), p.gamma1(), t / p.ttf());
}

double eval_quadratic(const QuadraticParams& p, double t) {
    require_finite(p.sigma, "Sigma");
    require_time(t);
    if (t >= p.ttf()) return 0.0;
    return quadratic_polynomial(p, t);
}

double bspline_piece(const BSplineParams& p, int piece, double t) {
    require_finite(p.a0, "A0");
    require_finite(p.a1, "A1");
    require_finite(p.a2, "A2");
    require_finite(p.omega, "Omega");
    const double s = t / p.ttf();
    switch (piece) {
        case 0: return piece0(p.gamma0(), p.gamma1(), p.gamma2(), s);
        case 1: return piece1(p.gamma1(), p.gamma2(), s);
        default: throw InvalidParameter(fmt::format("B-spline piece index {} out of range", piece));
    }
}

double eval_bspline(const BSplineParams& p, double t) {
    require_finite(p.sigma, "Sigma");
    require_time(t);
    const double w = p.ttf();
    if (t >= w) return 0.0;
    return bspline_piece(p, t < 0.5 * w ? 0 : 1, t);
}

KnotVector::KnotVector(double boundary, int interior_count) : interior_count_(interior_count) {
    if (!(boundary > 0.0) || !std::isfinite(boundary))
        throw InvalidParameter("knot boundary must be positive and finite");
    if (interior_count != 0 && interior_count != 1)
        throw InvalidParameter("only 0 or 1 interior knots are supported");
    knots_.assign(order, 0.0);
    if (interior_count == 1) knots_.push_back(0.5 * boundary);
    knots_.insert(knots_.end(), order, boundary);
}

double bspline_basis(const KnotVector& kv, int l, int degree, double t) {
    if (degree < 0 || degree > KnotVector::order - 1)
        throw InvalidParameter(fmt::format("basis degree {} out of range [0, {}]", degree,
                                           KnotVector::order - 1));
    if (l < 0 || l >= kv.basis_count(degree))
        throw InvalidParameter(fmt::format("basis index {} out of range for degree {} ({} functions)", l,
                                           degree, kv.basis_count(degree)));

    if (degree == 0) return (kv[l] <= t && t < kv[l + 1]) ? 1.0 : 0.0;

    auto weight = [&](int i, int j) {
        const double span = kv[i + j] - kv[i];
        return span != 0.0 ? (t - kv[i]) / span : 0.0;
    };
    return weight(l, degree) * bspline_basis(kv, l, degree - 1, t) +
           (1.0 - weight(l + 1, degree)) * bspline_basis(kv, l + 1, degree - 1, t);
}

double bspline_combination(const KnotVector& kv, std::span<const double> coefficients, double t) {
    const int degree = KnotVector::order - 1;
    if (static_cast<int>(coefficients.size()) != kv.basis_count(degree))
        throw InvalidParameter(fmt::format("expected {} spline coefficients, got {}",
                                           kv.basis_count(degree), coefficients.size()));
    double sum = 0.0;
    for (int l = 0; l < kv.basis_count(degree); ++l)
        sum += coefficients[static_cast<std::size_t>(l)] * bspline_basis(kv, l, degree, t);
    return sum;
}

namespace {

void check_positive_finite(ConstraintReport& r, double log_value, const char* name) {
    const double v = std::exp(log_value);
    if (!std::isfinite(log_value) || !std::isfinite(v) || !(v > 0.0)) {
        r.ok = false;
        r.violations.push_back(fmt::format("{} = exp({}) is not finite and positive", name, log_value));
    }
}

}  // namespace

ConstraintReport check_constraints(const QuadraticParams& p) {
    ConstraintReport r;
    check_positive_finite(r, p.a0, "gamma0");
    check_positive_finite(r, p.a1, "gamma1");
    check_positive_finite(r, p.omega, "omega");
    check_positive_finite(r, p.sigma, "sigma");
    return r;
}

ConstraintReport check_constraints(const BSplineParams& p) {
    ConstraintReport r;
    check_positive_finite(r, p.a0, "gamma0");
    check_positive_finite(r, p.a1, "gamma1");
    check_positive_finite(r, p.a2, "gamma2");
    check_positive_finite(r, p.omega, "omega");
    check_positive_finite(r, p.sigma, "sigma");
    if (!r.ok) return r;
    r.knot_slope = 2.0 * (p.gamma2() - p.gamma1()) / p.ttf();
    // gamma2 <= gamma1  <=>  A2 <= A1; compare on the log scale to avoid rounding.
    if (p.a2 > p.a1) {
        r.ok = false;
        r.violations.push_back(fmt::format(
            "gamma2 = {:.6g} exceeds gamma1 = {:.6g}: curve increases after the interior knot",
            p.gamma2(), p.gamma1()));
    }
    return r;
}

std::optional<QuadraticParams> collapse_to_quadratic(const BSplineParams& p, double rel_tol) {
    const double g0 = p.gamma0();
    const double g1 = p.gamma1();
    const double g2 = p.gamma2();
    const double target = g1 - 0.5 * g0;
    const double scale = std::max({g0, g1, g2});
    if (std::abs(g2 - target) > rel_tol * scale) return std::nullopt;
    const double g1_quad = 2.0 * g1 - g0;
    if (!(g1_quad > 0.0)) return std::nullopt;
    return QuadraticParams{p.a0, std::log(g1_quad), p.omega, p.sigma};
}

CurveParams curve_from_latents(ModelKind kind, std::span<const double> latents) {
    const std::size_t expected = kind == ModelKind::quadratic ? 4 : 5;
    if (latents.size() != expected)
        throw InvalidParameter(fmt::format("{} model expects {} latents, got {}", to_string(kind), expected,
                                           latents.size()));
    if (kind == ModelKind::quadratic) return QuadraticParams{latents[0], latents[1], latents[2], latents[3]};
    return BSplineParams{latents[0], latents[1], latents[2], latents[3], latents[4]};
}

ModelKind model_of(const CurveParams& p) {
    return std::holds_alternative<QuadraticParams>(p) ? ModelKind::quadratic : ModelKind::bspline;
}

double eval_curve(const CurveParams& p, double t) {
    return std::visit(
        [t](const auto& q) {
            if constexpr (std::is_same_v<std::decay_t<decltype(q)>, QuadraticParams>)
                return eval_quadratic(q, t);
            else
                return eval_bspline(q, t);
        },
        p);
}

double curve_ttf(const CurveParams& p) {
    return std::visit([](const auto& q) { return q.ttf(); }, p);
}

double curve_noise_sd(const CurveParams& p) {
    return std::visit([](const auto& q) { return q.noise_sd(); }, p);
}

double curve_value(ModelKind kind, std::span<const double> shape, double t) {
    return CurveShape::from_log(kind, shape).value(t);
}

double curve_value_and_gradient(ModelKind kind, std::span<const double> shape, double t,
                                std::span<double> grad) {
    return CurveShape::from_log(kind, shape).value_and_gradient(t, grad);
}

CurveShape CurveShape::from_log(ModelKind kind, std::span<const double> shape) {
    CurveShape c;
    c.kind = kind;
    c.g0 = std::exp(shape[0]);
    c.g1 = std::exp(shape[1]);
    if (kind == ModelKind::quadratic) {
        c.w = std::exp(shape[2]);
    } else {
        c.g2 = std::exp(shape[2]);
        c.w = std::exp(shape[3]);
    }
    return c;
}

double CurveShape::value(double t) const {
    if (t >= w) return 0.0;
    const double s = t / w;
    if (kind == ModelKind::quadratic) return quad_poly(g0, g1, s);
    return s < 0.5 ? piece0(g0, g1, g2, s) : piece1(g1, g2, s);
}

double CurveShape::value_and_gradient(double t, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    if (t >= w) return 0.0;
    const double s = t / w;
    if (kind == ModelKind::quadratic) {
        const double r = 1.0 - s;
        grad[0] = g0 * r * r;
        grad[1] = g1 * 2.0 * s * r;
        const double dfds = -2.0 * g0 * r + 2.0 * g1 * (1.0 - 2.0 * s);
        grad[2] = -s * dfds;  // d/dOmega with s = t exp(-Omega)
        return grad[0] + grad[1];
    }
    double dfds = 0.0;
    if (s < 0.5) {
        const double a = 1.0 - 2.0 * s;
        grad[0] = g0 * a * a;
        grad[1] = g1 * 2.0 * s * (2.0 - 3.0 * s);
        grad[2] = g2 * 2.0 * s * s;
        dfds = 4.0 * (g1 - g0) + 2.0 * s * (4.0 * g0 - 6.0 * g1 + 2.0 * g2);
    } else {
        const double r = 1.0 - s;
        grad[1] = g1 * 2.0 * r * r;
        grad[2] = -g2 * 2.0 * r * (1.0 - 3.0 * s);
        dfds = (8.0 * g2 - 4.0 * g1) + 2.0 * s * (2.0 * g1 - 6.0 * g2);
    }
    grad[3] = -s * dfds;
    return grad[0] + grad[1] + grad[2];
}

}  // namespace fosemu
