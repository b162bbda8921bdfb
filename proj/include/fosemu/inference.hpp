#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "fosemu/data.hpp"
#include "fosemu/fos_models.hpp"
#include "fosemu/gp_emulator.hpp"

namespace fosemu {

/// Standardized design rows aligned with their series. `series` may be empty for a
/// hyperprior-only target, and individual series may be empty (latents then follow the GP prior).
struct TrainingData {
    Eigen::MatrixXd z;  ///< n x 5
    std::vector<FoSSeries> series;

    std::size_t run_count() const { return static_cast<std::size_t>(z.rows()); }
};

struct ModelState {
    ModelKind model = ModelKind::bspline;
    Eigen::MatrixXd latents;  ///< runs x outputs, columns in model_outputs() order
    EmulatorHyper hyper;
};

/// Sum over runs and times of log N(Y; g(t), sigma^2).
double log_likelihood(const ModelState& state, std::span<const FoSSeries> data);

/// Joint log density of latents and hyperparameters (no change-of-variables terms).
/// -inf when gamma2 > gamma1 for any run or a hyperparameter leaves its support.
double log_posterior(const ModelState& state, const TrainingData& data);

/// The posterior as a density over an unconstrained vector, for samplers.
///
/// Layout: latents (output-major, runs within), beta (output-major, 6 per output),
/// log tau (per output), log delta (5). The density includes the log-Jacobian of
/// the tau and delta transforms.
class PosteriorModel {
public:
    PosteriorModel(ModelKind model, TrainingData data, double nugget = kDefaultNugget);

    ModelKind model() const { return model_; }
    std::size_t dimension() const { return dim_; }
    std::size_t run_count() const { return n_; }
    int outputs() const { return n_out_; }
    double nugget() const { return nugget_; }
    const TrainingData& data() const { return data_; }

    std::size_t latent_index(int output, std::size_t run) const { return static_cast<std::size_t>(output) * n_ + run; }
    std::size_t beta_index(int output, int k) const { return beta_offset_ + static_cast<std::size_t>(output * kRegressorCount + k); }
    std::size_t tau_index(int output) const { return tau_offset_ + static_cast<std::size_t>(output); }
    std::size_t delta_index(int k) const { return delta_offset_ + static_cast<std::size_t>(k); }

    /// Names of the constrained parameters, e.g. "A0[12]", "beta_Omega[0]", "tau_A1", "delta[3]".
    const std::vector<std::string>& parameter_names() const { return names_; }

    double log_density(std::span<const double> theta) const;
    double log_density_gradient(std::span<const double> theta, std::span<double> grad) const;

    std::vector<double> pack(const ModelState& state) const;
    ModelState unpack(std::span<const double> theta) const;
    /// Same layout with tau and delta exponentiated.
    std::vector<double> constrain(std::span<const double> theta) const;
    std::vector<double> unconstrain(std::span<const double> constrained) const;

    /// Least-squares curve fits per run (omega from the series end), hyperparameters at prior means.
    ModelState initial_state() const;

private:
    double evaluate(std::span<const double> theta, double* grad) const;

    ModelKind model_;
    TrainingData data_;
    double nugget_;
    std::size_t n_;
    int n_out_;
    std::size_t beta_offset_;
    std::size_t tau_offset_;
    std::size_t delta_offset_;
    std::size_t dim_;
    std::vector<std::string> names_;
    Eigen::MatrixXd h_;                       // regressor matrix
    std::vector<Eigen::MatrixXd> sq_dist_;    // per input: (z_ik - z_jk)^2
};

}  // namespace fosemu
