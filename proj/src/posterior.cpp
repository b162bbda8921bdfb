#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "fosemu/error.hpp"
#include "fosemu/inference.hpp"
#include "fosemu/stats.hpp"

namespace fosemu {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.83787706640934548356;

}  // namespace

double log_likelihood(const ModelState& state, std::span<const FoSSeries> data) {
    if (static_cast<std::size_t>(state.latents.rows()) != data.size())
        throw InvalidParameter(fmt::format("{} series but {} sets of curve parameters", data.size(),
                                           state.latents.rows()));
    const int n_out = output_count(state.model);
    if (state.latents.cols() != n_out)
        throw InvalidParameter(fmt::format("{} model expects {} latent columns, got {}", to_string(state.model),
                                           n_out, state.latents.cols()));
    const int n_shape = shape_parameter_count(state.model);
    std::array<double, 4> shape{};
    double lp = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (int k = 0; k < n_shape; ++k) shape[static_cast<std::size_t>(k)] = state.latents(row, k);
        const double log_sd = state.latents(row, n_out - 1);
        const double inv_var = std::exp(-2.0 * log_sd);
        const auto& s = data[i];
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double r = s.excess[j] -
                             curve_value(state.model, std::span<const double>(shape.data(), n_shape), s.years[j]);
            lp += -0.5 * kLog2Pi - log_sd - 0.5 * r * r * inv_var;
        }
    }
    return lp;
}

PosteriorModel::PosteriorModel(ModelKind model, TrainingData data, double nugget)
    : model_(model), data_(std::move(data)), nugget_(nugget) {
    n_ = data_.run_count();
    if (data_.z.cols() != kIcCount && n_ > 0) throw InvalidParameter("design must have 5 standardized columns");
    if (!data_.series.empty() && data_.series.size() != n_)
        throw InvalidParameter(fmt::format("{} design rows but {} series", n_, data_.series.size()));
    if (data_.series.empty()) {
        data_.series.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) data_.series[i].run_id = static_cast<int>(i) + 1;
    }
    if (!(nugget_ >= 0.0)) throw InvalidParameter("nugget must be non-negative");
    n_out_ = output_count(model_);
    beta_offset_ = static_cast<std::size_t>(n_out_) * n_;
    tau_offset_ = beta_offset_ + static_cast<std::size_t>(n_out_ * kRegressorCount);
    delta_offset_ = tau_offset_ + static_cast<std::size_t>(n_out_);
    dim_ = delta_offset_ + kIcCount;

    const auto outs = model_outputs(model_);
    names_.resize(dim_);
    for (int l = 0; l < n_out_; ++l) {
        const auto nm = output_name(outs[static_cast<std::size_t>(l)]);
        for (std::size_t i = 0; i < n_; ++i)
            names_[latent_index(l, i)] = fmt::format("{}[{}]", nm, data_.series[i].run_id);
        for (int k = 0; k < kRegressorCount; ++k) names_[beta_index(l, k)] = fmt::format("beta_{}[{}]", nm, k);
        names_[tau_index(l)] = fmt::format("tau_{}", nm);
    }
    for (int k = 0; k < kIcCount; ++k) names_[delta_index(k)] = fmt::format("delta[{}]", k + 1);

    if (n_ > 0) {
        h_ = regressor_matrix(data_.z);
        sq_dist_.assign(kIcCount, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_)));
        for (int k = 0; k < kIcCount; ++k)
            for (Eigen::Index i = 0; i < data_.z.rows(); ++i)
                for (Eigen::Index j = 0; j < data_.z.rows(); ++j) {
                    const double d = data_.z(i, k) - data_.z(j, k);
                    sq_dist_[static_cast<std::size_t>(k)](i, j) = d * d;
                }
    }
}

double PosteriorModel::log_density(std::span<const double> theta) const { return evaluate(theta, nullptr); }

double PosteriorModel::log_density_gradient(std::span<const double> theta, std::span<double> grad) const {
    if (grad.size() != dim_) throw InvalidParameter("gradient buffer has the wrong size");
    return evaluate(theta, grad.data());
}

double PosteriorModel::evaluate(std::span<const double> theta, double* grad) const {
    if (theta.size() != dim_)
        throw InvalidParameter(fmt::format("parameter vector has {} entries, expected {}", theta.size(), dim_));
    if (grad) std::fill(grad, grad + dim_, 0.0);
    for (double v : theta)
        if (!std::isfinite(v)) return kNegInf;

    const auto outs = model_outputs(model_);
    const int n_shape = shape_parameter_count(model_);
    const auto n = static_cast<Eigen::Index>(n_);

    // Support: gamma2 <= gamma1.
    if (model_ == ModelKind::bspline)
        for (std::size_t i = 0; i < n_; ++i)
            if (theta[latent_index(2, i)] > theta[latent_index(1, i)]) return kNegInf;

    double lp = 0.0;

    // Observation level.
    std::array<double, 4> shape{};
    std::array<double, 4> dshape{};
    for (std::size_t i = 0; i < n_; ++i) {
        const auto& s = data_.series[i];
        if (s.size() == 0) continue;
        for (int k = 0; k < n_shape; ++k) shape[static_cast<std::size_t>(k)] = theta[latent_index(k, i)];
        const double log_sd = theta[latent_index(n_out_ - 1, i)];
        const double inv_var = std::exp(-2.0 * log_sd);
        if (!std::isfinite(inv_var) || inv_var == 0.0) return kNegInf;
        double sum_sq = 0.0;
        std::array<double, 4> acc{};
        const CurveShape curve =
            CurveShape::from_log(model_, std::span<const double>(shape.data(), static_cast<std::size_t>(n_shape)));
        for (std::size_t j = 0; j < s.size(); ++j) {
            double g;
            if (grad) {
                g = curve.value_and_gradient(s.years[j], std::span<double>(dshape.data(), static_cast<std::size_t>(n_shape)));
                const double r = s.excess[j] - g;
                for (int k = 0; k < n_shape; ++k) acc[static_cast<std::size_t>(k)] += r * dshape[static_cast<std::size_t>(k)];
                sum_sq += r * r;
            } else {
                g = curve.value(s.years[j]);
                const double r = s.excess[j] - g;
                sum_sq += r * r;
            }
        }
        const auto m = static_cast<double>(s.size());
        lp += -0.5 * m * kLog2Pi - m * log_sd - 0.5 * sum_sq * inv_var;
        if (grad) {
            for (int k = 0; k < n_shape; ++k) grad[latent_index(k, i)] += acc[static_cast<std::size_t>(k)] * inv_var;
            grad[latent_index(n_out_ - 1, i)] += -m + sum_sq * inv_var;
        }
    }

    // Hyperparameters in their natural scale.
    EmulatorHyper hyper;
    hyper.beta.resize(kRegressorCount, n_out_);
    hyper.tau.resize(n_out_);
    hyper.nugget = nugget_;
    for (int l = 0; l < n_out_; ++l) {
        for (int k = 0; k < kRegressorCount; ++k) hyper.beta(k, l) = theta[beta_index(l, k)];
        hyper.tau(l) = std::exp(theta[tau_index(l)]);
    }
    for (int k = 0; k < kIcCount; ++k) hyper.delta[static_cast<std::size_t>(k)] = std::exp(theta[delta_index(k)]);

    // GP level: A_l ~ N(H beta_l, tau_l U).
    if (n_ > 0) {
        for (int k = 0; k < kIcCount; ++k)
            if (!(hyper.delta[static_cast<std::size_t>(k)] > 0.0) || !std::isfinite(hyper.delta[static_cast<std::size_t>(k)]))
                return kNegInf;
        Eigen::MatrixXd kern(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            kern(i, i) = 1.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                double q = 0.0;
                for (int k = 0; k < kIcCount; ++k) {
                    const double dk = hyper.delta[static_cast<std::size_t>(k)];
                    q += sq_dist_[static_cast<std::size_t>(k)](i, j) / (dk * dk);
                }
                kern(i, j) = kern(j, i) = std::exp(-q);
            }
        }
        Eigen::MatrixXd u = kern;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                bool same = true;
                for (int k = 0; k < kIcCount && same; ++k) same = sq_dist_[static_cast<std::size_t>(k)](i, j) == 0.0;
                if (same) {
                    u(i, j) += nugget_;
                    if (i != j) u(j, i) += nugget_;
                }
            }
        Eigen::LLT<Eigen::MatrixXd> llt(u);
        if (llt.info() != Eigen::Success) return kNegInf;
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));

        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd a(n);
        for (int l = 0; l < n_out_; ++l) {
            for (Eigen::Index i = 0; i < n; ++i) a(i) = theta[latent_index(l, static_cast<std::size_t>(i))];
            const Eigen::VectorXd r = a - h_ * hyper.beta.col(l);
            const Eigen::VectorXd alpha = llt.solve(r);
            const double q = r.dot(alpha);
            const double tau = hyper.tau(l);
            lp += -0.5 * static_cast<double>(n) * (kLog2Pi + std::log(tau)) - 0.5 * log_det - 0.5 * q / tau;
            if (grad) {
                for (Eigen::Index i = 0; i < n; ++i)
                    grad[latent_index(l, static_cast<std::size_t>(i))] -= alpha(i) / tau;
                const Eigen::VectorXd gb = h_.transpose() * alpha / tau;
                for (int k = 0; k < kRegressorCount; ++k) grad[beta_index(l, k)] += gb(k);
                grad[tau_index(l)] += -0.5 * static_cast<double>(n) + 0.5 * q / tau;
                w.noalias() += alpha * alpha.transpose() / tau;
            }
        }
        if (grad) {
            // d/d delta_k of sum_l log N(A_l; H beta_l, tau_l U) = 0.5 tr(W dU/d delta_k),
            // W = sum_l alpha_l alpha_l' / tau_l - L U^-1.
            const Eigen::MatrixXd u_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
            w -= static_cast<double>(n_out_) * u_inv;
            for (int k = 0; k < kIcCount; ++k) {
                const double dk = hyper.delta[static_cast<std::size_t>(k)];
                // with respect to log delta_k: dU/dlog d = K .* 2 D_k / d^2
                const double s = (w.array() * kern.array() * sq_dist_[static_cast<std::size_t>(k)].array()).sum();
                grad[delta_index(k)] += s / (dk * dk);
            }
        }
    }

    // Hyperprior and log-Jacobian of tau = exp(u), delta = exp(v).
    const double lph = log_prior_hyper(hyper, model_);
    if (!std::isfinite(lph)) return kNegInf;
    lp += lph;
    for (int l = 0; l < n_out_; ++l) lp += theta[tau_index(l)];
    for (int k = 0; k < kIcCount; ++k) lp += theta[delta_index(k)];
    if (grad) {
        for (int l = 0; l < n_out_; ++l) {
            const Output o = outs[static_cast<std::size_t>(l)];
            const auto icpt = HyperPrior::intercept(o);
            grad[beta_index(l, 0)] -= (hyper.beta(0, l) - icpt.mean) / (icpt.sd * icpt.sd);
            const double ssd = HyperPrior::slope_sd(o);
            for (int k = 1; k < kRegressorCount; ++k) grad[beta_index(l, k)] -= hyper.beta(k, l) / (ssd * ssd);
            grad[tau_index(l)] += -HyperPrior::tau_shape + HyperPrior::tau_scale / hyper.tau(l);
        }
        for (int k = 0; k < kIcCount; ++k)
            grad[delta_index(k)] += 1.0 - HyperPrior::delta_rate * hyper.delta[static_cast<std::size_t>(k)];
    }
    return std::isfinite(lp) ? lp : kNegInf;
}

std::vector<double> PosteriorModel::pack(const ModelState& state) const {
    if (state.model != model_) throw InvalidParameter("state model does not match the posterior model");
    if (static_cast<std::size_t>(state.latents.rows()) != n_ || state.latents.cols() != n_out_)
        throw InvalidParameter(fmt::format("latent matrix is {}x{}, expected {}x{}", state.latents.rows(),
                                           state.latents.cols(), n_, n_out_));
    if (state.hyper.beta.rows() != kRegressorCount || state.hyper.beta.cols() != n_out_ ||
        state.hyper.tau.size() != n_out_)
        throw InvalidParameter("hyperparameter shapes do not match the model");
    std::vector<double> theta(dim_);
    for (int l = 0; l < n_out_; ++l) {
        for (std::size_t i = 0; i < n_; ++i) theta[latent_index(l, i)] = state.latents(static_cast<Eigen::Index>(i), l);
        for (int k = 0; k < kRegressorCount; ++k) theta[beta_index(l, k)] = state.hyper.beta(k, l);
        theta[tau_index(l)] = std::log(state.hyper.tau(l));
    }
    for (int k = 0; k < kIcCount; ++k) theta[delta_index(k)] = std::log(state.hyper.delta[static_cast<std::size_t>(k)]);
    return theta;
}

ModelState PosteriorModel::unpack(std::span<const double> theta) const {
    if (theta.size() != dim_) throw InvalidParameter("parameter vector has the wrong size");
    ModelState s;
    s.model = model_;
    s.latents.resize(static_cast<Eigen::Index>(n_), n_out_);
    s.hyper.beta.resize(kRegressorCount, n_out_);
    s.hyper.tau.resize(n_out_);
    s.hyper.nugget = nugget_;
    for (int l = 0; l < n_out_; ++l) {
        for (std::size_t i = 0; i < n_; ++i) s.latents(static_cast<Eigen::Index>(i), l) = theta[latent_index(l, i)];
        for (int k = 0; k < kRegressorCount; ++k) s.hyper.beta(k, l) = theta[beta_index(l, k)];
        s.hyper.tau(l) = std::exp(theta[tau_index(l)]);
    }
    for (int k = 0; k < kIcCount; ++k) s.hyper.delta[static_cast<std::size_t>(k)] = std::exp(theta[delta_index(k)]);
    return s;
}

std::vector<double> PosteriorModel::constrain(std::span<const double> theta) const {
    std::vector<double> out(theta.begin(), theta.end());
    for (std::size_t j = tau_offset_; j < dim_; ++j) out[j] = std::exp(out[j]);
    return out;
}

std::vector<double> PosteriorModel::unconstrain(std::span<const double> constrained) const {
    std::vector<double> out(constrained.begin(), constrained.end());
    for (std::size_t j = tau_offset_; j < dim_; ++j) out[j] = std::log(out[j]);
    return out;
}

ModelState PosteriorModel::initial_state() const {
    ModelState s;
    s.model = model_;
    s.hyper = EmulatorHyper::prior_mean(model_, nugget_);
    s.latents.resize(static_cast<Eigen::Index>(n_), n_out_);
    if (n_ == 0) return s;
    const Eigen::MatrixXd prior_mean = h_ * s.hyper.beta;
    const int n_shape = shape_parameter_count(model_);
    const int n_coef = n_shape - 1;  // gammas

    for (std::size_t i = 0; i < n_; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const auto& series = data_.series[i];
        if (series.size() < static_cast<std::size_t>(n_coef + 1)) {
            s.latents.row(row) = prior_mean.row(row);
            continue;
        }
        const double last = std::max(series.last_year(), 1.0);
        const double ttf = series.censored ? 1.5 * last : last + 1.0;

        // With omega fixed the curve is linear in the gammas; the basis columns are
        // dg/dA at A = 0, i.e. dg/dgamma at gamma = 1.
        std::array<double, 4> shape{};
        shape[static_cast<std::size_t>(n_shape - 1)] = std::log(ttf);
        std::array<double, 4> basis{};
        Eigen::MatrixXd b(static_cast<Eigen::Index>(series.size()), n_coef);
        Eigen::VectorXd y(static_cast<Eigen::Index>(series.size()));
        for (std::size_t j = 0; j < series.size(); ++j) {
            curve_value_and_gradient(model_, std::span<const double>(shape.data(), static_cast<std::size_t>(n_shape)),
                                     series.years[j], std::span<double>(basis.data(), static_cast<std::size_t>(n_shape)));
            for (int k = 0; k < n_coef; ++k) b(static_cast<Eigen::Index>(j), k) = basis[static_cast<std::size_t>(k)];
            y(static_cast<Eigen::Index>(j)) = series.excess[j];
        }
        Eigen::VectorXd gamma = b.colPivHouseholderQr().solve(y);
        const double floor = 1e-2 * std::max(std::abs(gamma(0)), 0.1);
        for (int k = 0; k < n_coef; ++k)
            if (!(gamma(k) > floor)) gamma(k) = floor;
        if (model_ == ModelKind::bspline) gamma(2) = std::min(gamma(2), gamma(1));
        const double rms = std::sqrt((y - b * gamma).squaredNorm() / static_cast<double>(series.size()));

        for (int k = 0; k < n_coef; ++k) s.latents(row, k) = std::log(gamma(k));
        s.latents(row, n_shape - 1) = std::log(ttf);
        s.latents(row, n_out_ - 1) = std::log(std::max(rms, 1e-3));
    }
    return s;
}

double log_posterior(const ModelState& state, const TrainingData& data) {
    const PosteriorModel model(state.model, data, state.hyper.nugget);
    const auto theta = model.pack(state);
    const double lp = model.log_density(theta);
    if (!std::isfinite(lp)) return lp;
    // Remove the change-of-variables terms added for the unconstrained parameterization.
    double jac = 0.0;
    for (int l = 0; l < model.outputs(); ++l) jac += theta[model.tau_index(l)];
    for (int k = 0; k < kIcCount; ++k) jac += theta[model.delta_index(k)];
    return lp - jac;
}

}  // namespace fosemu
