#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fosemu {

enum class ModelKind { quadratic, bspline };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Number of log-scale shape parameters entering the deterministic curve:
/// (A0, A1, Omega) for the quadratic, (A0, A1, A2, Omega) for the B-spline.
constexpr int shape_parameter_count(ModelKind kind) { return kind == ModelKind::quadratic ? 3 : 4; }

/// Single quadratic deterioration curve, parameters on the log scale.
struct QuadraticParams {
    double a0 = 0.0;     ///< log initial excess FoS
    double a1 = 0.0;     ///< log shape coefficient
    double omega = 0.0;  ///< log model time-to-failure (years)
    double sigma = 0.0;  ///< log observation noise sd

    static QuadraticParams from_constrained(double gamma0, double gamma1, double ttf, double noise_sd);

    double gamma0() const { return std::exp(a0); }
    double gamma1() const { return std::exp(a1); }
    double ttf() const { return std::exp(omega); }
    double noise_sd() const { return std::exp(sigma); }
};

/// Two-piece quadratic B-spline with its interior knot at half the model TTF.
struct BSplineParams {
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;  ///< log second-piece coefficient
    double omega = 0.0;
    double sigma = 0.0;

    static BSplineParams from_constrained(double gamma0, double gamma1, double gamma2, double ttf,
                                          double noise_sd);

    double gamma0() const { return std::exp(a0); }
    double gamma1() const { return std::exp(a1); }
    double gamma2() const { return std::exp(a2); }
    double ttf() const { return std::exp(omega); }
    double noise_sd() const { return std::exp(sigma); }
    double knot() const { return 0.5 * ttf(); }
};

/// g1(t): zero for t >= omega.
double eval_quadratic(const QuadraticParams& p, double t);
/// The quadratic polynomial without the [0, omega) indicator.
double quadratic_polynomial(const QuadraticParams& p, double t);

/// g2(t): first piece on [0, omega/2), second on [omega/2, omega), zero afterwards.
double eval_bspline(const BSplineParams& p, double t);
/// Raw polynomial of piece 0 or 1, ignoring the indicators.
double bspline_piece(const BSplineParams& p, int piece, double t);

/// Augmented knot sequence for an order-3 spline on [0, boundary] with m in {0, 1}
/// interior knots (the interior knot, if any, sits at boundary / 2).
class KnotVector {
public:
    static constexpr int order = 3;

    KnotVector(double boundary, int interior_count);

    std::span<const double> knots() const { return knots_; }
    int interior_count() const { return interior_count_; }
    int size() const { return static_cast<int>(knots_.size()); }
    /// Number of basis functions of the given degree.
    int basis_count(int degree) const { return size() - degree - 1; }
    double operator[](int l) const { return knots_[static_cast<std::size_t>(l)]; }

private:
    std::vector<double> knots_;
    int interior_count_;
};

/// De Boor / Cox recursion phi_{l,degree}(t); 0/0 weights are taken as 0.
double bspline_basis(const KnotVector& kv, int l, int degree, double t);

/// sum_l coefficients[l] * phi_{l,order-1}(t).
double bspline_combination(const KnotVector& kv, std::span<const double> coefficients, double t);

struct ConstraintReport {
    bool ok = true;
    std::vector<std::string> violations;
    /// Derivative of the second piece at the knot, 2 (gamma2 - gamma1) / omega. B-spline only.
    std::optional<double> knot_slope;
};

ConstraintReport check_constraints(const QuadraticParams& p);
ConstraintReport check_constraints(const BSplineParams& p);

/// Returns the equivalent quadratic when gamma2 == gamma1 - gamma0/2 (relative tolerance).
std::optional<QuadraticParams> collapse_to_quadratic(const BSplineParams& p, double rel_tol = 1e-9);

/// Per-run curve parameters for either model.
using CurveParams = std::variant<QuadraticParams, BSplineParams>;

/// Builds curve parameters from latents in model output order (A0, A1, [A2], Omega, Sigma).
CurveParams curve_from_latents(ModelKind kind, std::span<const double> latents);
ModelKind model_of(const CurveParams& p);
double eval_curve(const CurveParams& p, double t);
double curve_ttf(const CurveParams& p);
double curve_noise_sd(const CurveParams& p);

/// Exponentiated shape parameters, for evaluating one curve at many times.
struct CurveShape {
    ModelKind kind = ModelKind::bspline;
    double g0 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;  ///< unused by the quadratic
    double w = 0.0;   ///< model TTF

    /// `shape` holds (A0, A1, [A2], Omega) on the log scale.
    static CurveShape from_log(ModelKind kind, std::span<const double> shape);
    double value(double t) const;
    /// Also writes d g / d shape[k] with respect to the log-scale parameters.
    double value_and_gradient(double t, std::span<double> grad) const;
};

// Hot-path forms used by the likelihood. `shape` holds (A0, A1, [A2], Omega) on the log
// scale; no validation is performed.
double curve_value(ModelKind kind, std::span<const double> shape, double t);
/// Also writes d g / d shape[k] into `grad` (same length as `shape`).
double curve_value_and_gradient(ModelKind kind, std::span<const double> shape, double t,
                                std::span<double> grad);

}  // namespace fosemu
