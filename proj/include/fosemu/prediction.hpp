#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fosemu/gp_emulator.hpp"
#include "fosemu/sampler.hpp"

namespace fosemu {

/// Pointwise summary of FoS = 1 + g(t) + noise across posterior draws.
struct PredictionBand {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> lo95;
    std::vector<double> hi95;
    /// Mean of the deterministic 1 + g(t), without noise.
    std::vector<double> curve_mean;
    /// Noisy FoS per draw (draws x grid) when requested.
    std::optional<Eigen::MatrixXd> samples;
};

struct TTFDistribution {
    std::vector<double> rho;    ///< predicted TTF per draw
    std::vector<double> omega;  ///< model TTF per draw
    double step = 1.0;

    double rho_quantile(double p) const;
    double omega_quantile(double p) const;
};

struct PredictionOptions {
    std::uint64_t seed = 1;
    bool keep_samples = false;
    /// Spacing of the grid on which the noisy series is scanned for failure.
    double ttf_step = 1.0;
    /// Worker threads over draws; 0 uses the hardware concurrency.
    int threads = 0;
};

/// Curve parameters of one training run for every posterior draw (chain-major).
std::vector<CurveParams> run_curves(const PosteriorDraws& draws, ModelKind kind, int run_id);

/// Noise-free and noisy FoS bands from a set of curve draws. The noise at (draw d, time t)
/// is a fixed function of (seed, d, t).
PredictionBand fos_band(std::span<const CurveParams> curves, std::span<const double> grid,
                        const PredictionOptions& opts);

/// First grid time t = step, 2 step, ... with g(t) + noise <= 0, or with g(t) <= 0 when the
/// noise never triggers failure first. Never exceeds the first grid point at or past omega.
double first_failure_time(const CurveParams& curve, std::uint64_t seed, std::uint64_t draw, double step);

TTFDistribution ttf_distribution(std::span<const CurveParams> curves, const PredictionOptions& opts);

PredictionBand posterior_fos(const PosteriorDraws& draws, ModelKind kind, int run_id, std::span<const double> grid,
                             const PredictionOptions& opts = {});
TTFDistribution predicted_ttf(const PosteriorDraws& draws, ModelKind kind, int run_id,
                              const PredictionOptions& opts = {});

struct NormalMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// GP conditioning of one output on its values at the training inputs. Factorizes
/// Sigma = U(Z) + nugget I once; reuse it for every output sharing the correlation lengths.
class LatentConditioner {
public:
    /// Throws NumericalError when Sigma is not positive definite.
    LatentConditioner(Eigen::MatrixXd z_design, const CorrelationLengths& delta, double nugget);

    /// Moments of the output at z_star given values y at the training inputs.
    NormalMoments condition(const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double tau,
                            std::span<const double> z_star) const;

private:
    Eigen::MatrixXd z_;
    Eigen::MatrixXd h_;
    CorrelationLengths delta_;
    double nugget_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

NormalMoments condition_latent(const Eigen::VectorXd& y, const Eigen::MatrixXd& z_design, const Eigen::VectorXd& beta,
                               double tau, const CorrelationLengths& delta, double nugget,
                               std::span<const double> z_star);

struct OutOfSamplePrediction {
    PredictionBand band;
    TTFDistribution ttf;
    std::vector<CurveParams> curves;
    /// Draws dropped because no conditioned A2 satisfied the B-spline constraint.
    int skipped = 0;
};

/// Resamples of A2 per draw before the draw is skipped.
inline constexpr int kMaxConstraintResamples = 100;

/// For each posterior draw, conditions every output on that draw's training latents and
/// hyperparameters at the standardized x_star, samples new latents and propagates them
/// through the curve. `z_training` is the standardized training design in draw order.
/// Throws InvalidParameter when every draw is skipped.
OutOfSamplePrediction predict_out_of_sample(const PosteriorDraws& draws, ModelKind kind,
                                            const Eigen::MatrixXd& z_training, const StandardizationStats& stats,
                                            const InitialConditions& x_star, std::span<const double> grid,
                                            double nugget = kDefaultNugget, const PredictionOptions& opts = {});

}  // namespace fosemu
