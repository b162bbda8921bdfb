#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fosemu/fos_models.hpp"
#include "fosemu/random.hpp"

namespace fosemu {

inline constexpr int kIcCount = 5;
inline constexpr int kRegressorCount = kIcCount + 1;
/// Permeability is emulated on a 1e8-scaled axis.
inline constexpr double kPermeabilityScale = 1e8;
/// The angle is divided by this multiple of its training sd.
inline constexpr double kAngleSdMultiplier = 1.5;
inline constexpr double kDefaultNugget = 1e-6;

struct InitialConditions {
    double height_m = 0.0;
    double angle_deg = 0.0;
    double cohesion_kpa = 0.0;
    double friction_deg = 0.0;
    double permeability_m_per_s = 0.0;

    std::array<double, kIcCount> to_array() const {
        return {height_m, angle_deg, cohesion_kpa, friction_deg, permeability_m_per_s};
    }
    static InitialConditions from_array(const std::array<double, kIcCount>& x) {
        return {x[0], x[1], x[2], x[3], x[4]};
    }
};

using StandardizedIc = std::array<double, kIcCount>;

/// Per-IC training mean and sd. Permeability entries are on the 1e8 scale; the sd is
/// stored unmultiplied (the angle multiplier is applied in `standardize`).
struct StandardizationStats {
    std::array<double, kIcCount> mean{};
    std::array<double, kIcCount> sd{};

    static StandardizationStats from_training(std::span<const InitialConditions> training);
};

StandardizedIc standardize(const InitialConditions& x, const StandardizationStats& stats);
/// n x 5 matrix of standardized inputs.
Eigen::MatrixXd standardize_design(std::span<const InitialConditions> xs, const StandardizationStats& stats);

/// h(z) = (1, z1, ..., z5).
Eigen::Matrix<double, kRegressorCount, 1> regressor(std::span<const double> z);
Eigen::MatrixXd regressor_matrix(const Eigen::MatrixXd& z_design);

using CorrelationLengths = std::array<double, kIcCount>;

/// Anisotropic Gaussian correlation plus nugget on exact input equality.
double correlation(std::span<const double> z, std::span<const double> z_other, const CorrelationLengths& delta,
                   double nugget);
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& z_design, const CorrelationLengths& delta, double nugget);

/// Emulated curve parameters, in the column order used throughout.
enum class Output { a0, a1, a2, omega, sigma };

std::span<const Output> model_outputs(ModelKind kind);
inline int output_count(ModelKind kind) { return static_cast<int>(model_outputs(kind).size()); }
std::string_view output_name(Output o);
/// Column of `o` for `kind`, or nullopt when the model has no such output.
std::optional<int> output_column(ModelKind kind, Output o);

/// Elicited hyperprior constants.
struct HyperPrior {
    struct Normal {
        double mean;
        double sd;
    };
    static Normal intercept(Output o);
    static double slope_sd(Output o);
    static constexpr double tau_shape = 3.0;
    static constexpr double tau_scale = 0.5;
    static constexpr double delta_rate = 0.2;
};

struct EmulatorHyper {
    Eigen::MatrixXd beta;  ///< 6 x outputs
    Eigen::VectorXd tau;   ///< per-output marginal variance
    CorrelationLengths delta{};
    double nugget = kDefaultNugget;

    /// Prior means: elicited intercepts, zero slopes, E[tau] = 0.25, E[delta] = 5.
    static EmulatorHyper prior_mean(ModelKind kind, double nugget = kDefaultNugget);
};

/// Sum of hyperprior log densities; -inf outside the support.
double log_prior_hyper(const EmulatorHyper& h, ModelKind kind);

EmulatorHyper sample_hyper_prior(ModelKind kind, Rng& rng, double nugget = kDefaultNugget);

/// Draws A_l ~ N(H beta_l, tau_l U) independently per output. Returns n x outputs.
/// Throws NumericalError when U cannot be factorized.
Eigen::MatrixXd sample_latents_prior(const EmulatorHyper& h, const Eigen::MatrixXd& z_design, Rng& rng);

/// Curve parameters for each row of a latent matrix.
std::vector<CurveParams> assemble_curves(ModelKind kind, const Eigen::MatrixXd& latents);

struct PriorPredictiveOptions {
    ModelKind model = ModelKind::bspline;
    int draws = 1000;
    std::vector<double> grid;
    /// When unset, hyperparameters are drawn from the hyperprior for every draw.
    std::optional<EmulatorHyper> hyper;
    /// Pin A0 / Omega instead of sampling them (prior curve shape studies).
    std::optional<double> fixed_a0;
    std::optional<double> fixed_omega;
    double nugget = kDefaultNugget;
    /// Resamples of A2 allowed per draw before the draw is dropped (B-spline only).
    int max_resamples = 100;
};

struct PriorPredictive {
    Eigen::MatrixXd curves;  ///< draws x grid, deterministic g
    Eigen::MatrixXd series;  ///< draws x grid, g + noise
    std::vector<CurveParams> params;
    int dropped = 0;
};

PriorPredictive prior_predictive(std::span<const double> z, const PriorPredictiveOptions& opts, Rng& rng);

}  // namespace fosemu
