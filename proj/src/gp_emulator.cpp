#include "fosemu/gp_emulator.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "fosemu/error.hpp"
#include "fosemu/stats.hpp"

namespace fosemu {

namespace {

constexpr std::array<Output, 4> kQuadraticOutputs{Output::a0, Output::a1, Output::omega, Output::sigma};
constexpr std::array<Output, 5> kBSplineOutputs{Output::a0, Output::a1, Output::a2, Output::omega,
                                                Output::sigma};

std::array<double, kIcCount> scaled(const InitialConditions& x) {
    auto a = x.to_array();
    a[4] *= kPermeabilityScale;
    return a;
}

}  // namespace

StandardizationStats StandardizationStats::from_training(std::span<const InitialConditions> training) {
    if (training.size() < 2) throw InvalidParameter("standardization needs at least two training runs");
    StandardizationStats s;
    std::vector<double> column(training.size());
    for (int k = 0; k < kIcCount; ++k) {
        for (std::size_t i = 0; i < training.size(); ++i) column[i] = scaled(training[i])[k];
        s.mean[k] = stats::mean(column);
        s.sd[k] = std::sqrt(stats::variance(column));
    }
    return s;
}

StandardizedIc standardize(const InitialConditions& x, const StandardizationStats& s) {
    const auto v = scaled(x);
    StandardizedIc z{};
    for (int k = 0; k < kIcCount; ++k) {
        if (!(s.sd[k] > 0.0))
            throw InvalidParameter(fmt::format("standardization sd for input {} is not positive", k + 1));
        const double divisor = k == 1 ? kAngleSdMultiplier * s.sd[k] : s.sd[k];
        z[k] = (v[k] - s.mean[k]) / divisor;
    }
    return z;
}

Eigen::MatrixXd standardize_design(std::span<const InitialConditions> xs, const StandardizationStats& s) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(xs.size()), kIcCount);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto row = standardize(xs[i], s);
        for (int k = 0; k < kIcCount; ++k) z(static_cast<Eigen::Index>(i), k) = row[k];
    }
    return z;
}

Eigen::Matrix<double, kRegressorCount, 1> regressor(std::span<const double> z) {
    if (z.size() != kIcCount) throw InvalidParameter("regressor expects 5 standardized inputs");
    Eigen::Matrix<double, kRegressorCount, 1> h;
    h(0) = 1.0;
    for (int k = 0; k < kIcCount; ++k) h(k + 1) = z[k];
    return h;
}

Eigen::MatrixXd regressor_matrix(const Eigen::MatrixXd& z_design) {
    Eigen::MatrixXd h(z_design.rows(), kRegressorCount);
    h.col(0).setOnes();
    h.rightCols(kIcCount) = z_design;
    return h;
}

double correlation(std::span<const double> z, std::span<const double> z_other, const CorrelationLengths& delta,
                   double nugget) {
    if (z.size() != kIcCount || z_other.size() != kIcCount)
        throw InvalidParameter("correlation expects 5 standardized inputs");
    double q = 0.0;
    bool same = true;
    for (int k = 0; k < kIcCount; ++k) {
        if (!(delta[k] > 0.0)) throw InvalidParameter(fmt::format("correlation length {} is not positive", k + 1));
        const double d = z[k] - z_other[k];
        same = same && d == 0.0;
        q += d * d / (delta[k] * delta[k]);
    }
    return std::exp(-q) + (same ? nugget : 0.0);
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& z_design, const CorrelationLengths& delta, double nugget) {
    for (int k = 0; k < kIcCount; ++k)
        if (!(delta[k] > 0.0)) throw InvalidParameter(fmt::format("correlation length {} is not positive", k + 1));
    const Eigen::Index n = z_design.rows();
    Eigen::MatrixXd u(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u(i, i) = 1.0 + nugget;
        for (Eigen::Index j = 0; j < i; ++j) {
            double q = 0.0;
            bool same = true;
            for (int k = 0; k < kIcCount; ++k) {
                const double d = z_design(i, k) - z_design(j, k);
                same = same && d == 0.0;
                q += d * d / (delta[k] * delta[k]);
            }
            u(i, j) = u(j, i) = std::exp(-q) + (same ? nugget : 0.0);
        }
    }
    return u;
}

std::span<const Output> model_outputs(ModelKind kind) {
    if (kind == ModelKind::quadratic) return kQuadraticOutputs;
    return kBSplineOutputs;
}

std::string_view output_name(Output o) {
    switch (o) {
        case Output::a0: return "A0";
        case Output::a1: return "A1";
        case Output::a2: return "A2";
        case Output::omega: return "Omega";
        case Output::sigma: return "Sigma";
    }
    return "?";
}

std::optional<int> output_column(ModelKind kind, Output o) {
    const auto outs = model_outputs(kind);
    for (std::size_t i = 0; i < outs.size(); ++i)
        if (outs[i] == o) return static_cast<int>(i);
    return std::nullopt;
}

HyperPrior::Normal HyperPrior::intercept(Output o) {
    switch (o) {
        case Output::a0: return {std::log(1.0), 0.5};
        case Output::a1: return {std::log(0.6), 0.4};
        case Output::a2: return {-0.5, 2.5};
        case Output::omega: return {5.25, 1.0};
        case Output::sigma: return {std::log(0.1), 0.5};
    }
    return {0.0, 1.0};
}

double HyperPrior::slope_sd(Output o) {
    return (o == Output::a2 || o == Output::omega) ? 1.0 : 0.5;
}

EmulatorHyper EmulatorHyper::prior_mean(ModelKind kind, double nugget) {
    const auto outs = model_outputs(kind);
    EmulatorHyper h;
    h.beta = Eigen::MatrixXd::Zero(kRegressorCount, static_cast<Eigen::Index>(outs.size()));
    h.tau = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(outs.size()),
                                      HyperPrior::tau_scale / (HyperPrior::tau_shape - 1.0));
    for (std::size_t l = 0; l < outs.size(); ++l)
        h.beta(0, static_cast<Eigen::Index>(l)) = HyperPrior::intercept(outs[l]).mean;
    h.delta.fill(1.0 / HyperPrior::delta_rate);
    h.nugget = nugget;
    return h;
}

double log_prior_hyper(const EmulatorHyper& h, ModelKind kind) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const auto outs = model_outputs(kind);
    const auto n_out = static_cast<Eigen::Index>(outs.size());
    if (h.beta.rows() != kRegressorCount || h.beta.cols() != n_out || h.tau.size() != n_out)
        throw InvalidParameter(fmt::format("hyperparameter shapes do not match the {} model", to_string(kind)));
    double lp = 0.0;
    for (Eigen::Index l = 0; l < n_out; ++l) {
        const Output o = outs[static_cast<std::size_t>(l)];
        const auto icpt = HyperPrior::intercept(o);
        lp += stats::log_normal_pdf(h.beta(0, l), icpt.mean, icpt.sd);
        const double slope_sd = HyperPrior::slope_sd(o);
        for (int k = 1; k < kRegressorCount; ++k) lp += stats::log_normal_pdf(h.beta(k, l), 0.0, slope_sd);
        if (!(h.tau(l) > 0.0) || !std::isfinite(h.tau(l))) return kNegInf;
        lp += stats::log_inverse_gamma_pdf(h.tau(l), HyperPrior::tau_shape, HyperPrior::tau_scale);
    }
    for (int k = 0; k < kIcCount; ++k) {
        if (!(h.delta[k] > 0.0) || !std::isfinite(h.delta[k])) return kNegInf;
        lp += stats::log_exponential_pdf(h.delta[k], HyperPrior::delta_rate);
    }
    return std::isfinite(lp) ? lp : kNegInf;
}

EmulatorHyper sample_hyper_prior(ModelKind kind, Rng& rng, double nugget) {
    const auto outs = model_outputs(kind);
    EmulatorHyper h = EmulatorHyper::prior_mean(kind, nugget);
    std::normal_distribution<double> normal;
    // 1 / Gamma(shape, rate = scale) is InverseGamma(shape, scale).
    std::gamma_distribution<double> gamma(HyperPrior::tau_shape, 1.0 / HyperPrior::tau_scale);
    std::exponential_distribution<double> expo(HyperPrior::delta_rate);
    for (std::size_t l = 0; l < outs.size(); ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        const auto icpt = HyperPrior::intercept(outs[l]);
        h.beta(0, col) = icpt.mean + icpt.sd * normal(rng);
        for (int k = 1; k < kRegressorCount; ++k) h.beta(k, col) = HyperPrior::slope_sd(outs[l]) * normal(rng);
        h.tau(col) = 1.0 / gamma(rng);
    }
    for (auto& d : h.delta) d = expo(rng);
    return h;
}

Eigen::MatrixXd sample_latents_prior(const EmulatorHyper& h, const Eigen::MatrixXd& z_design, Rng& rng) {
    const Eigen::Index n = z_design.rows();
    const Eigen::MatrixXd u = correlation_matrix(z_design, h.delta, h.nugget);
    Eigen::LLT<Eigen::MatrixXd> llt(u);
    if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "Cholesky factorization of the {}x{} correlation matrix U failed (nugget {}); increase the nugget",
            n, n, h.nugget));
    const Eigen::MatrixXd mean = regressor_matrix(z_design) * h.beta;
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(n, h.beta.cols());
    const Eigen::MatrixXd lower = llt.matrixL();
    Eigen::VectorXd xi(n);
    for (Eigen::Index l = 0; l < h.beta.cols(); ++l) {
        for (Eigen::Index i = 0; i < n; ++i) xi(i) = normal(rng);
        a.col(l) = mean.col(l) + std::sqrt(h.tau(l)) * (lower * xi);
    }
    return a;
}

std::vector<CurveParams> assemble_curves(ModelKind kind, const Eigen::MatrixXd& latents) {
    std::vector<CurveParams> out;
    out.reserve(static_cast<std::size_t>(latents.rows()));
    std::vector<double> row(static_cast<std::size_t>(latents.cols()));
    for (Eigen::Index i = 0; i < latents.rows(); ++i) {
        for (Eigen::Index l = 0; l < latents.cols(); ++l) row[static_cast<std::size_t>(l)] = latents(i, l);
        out.push_back(curve_from_latents(kind, row));
    }
    return out;
}

PriorPredictive prior_predictive(std::span<const double> z, const PriorPredictiveOptions& opts, Rng& rng) {
    const auto outs = model_outputs(opts.model);
    const auto n_out = outs.size();
    const auto h_z = regressor(z);
    const auto grid_size = static_cast<Eigen::Index>(opts.grid.size());
    std::normal_distribution<double> normal;

    std::vector<std::vector<double>> accepted;
    PriorPredictive result;
    std::vector<double> latents(n_out);
    for (int d = 0; d < opts.draws; ++d) {
        const EmulatorHyper h = opts.hyper ? *opts.hyper : sample_hyper_prior(opts.model, rng, opts.nugget);
        // One input: U reduces to the scalar 1 + nugget.
        auto draw_output = [&](std::size_t l) {
            const auto col = static_cast<Eigen::Index>(l);
            return h_z.dot(h.beta.col(col)) + std::sqrt(h.tau(col) * (1.0 + h.nugget)) * normal(rng);
        };
        for (std::size_t l = 0; l < n_out; ++l) latents[l] = draw_output(l);
        if (opts.fixed_a0) latents[0] = *opts.fixed_a0;
        if (opts.fixed_omega) latents[n_out - 2] = *opts.fixed_omega;
        if (opts.model == ModelKind::bspline) {
            int tries = 0;
            while (latents[2] > latents[1] && tries < opts.max_resamples) {
                latents[2] = draw_output(2);
                ++tries;
            }
            if (latents[2] > latents[1]) {
                ++result.dropped;
                continue;
            }
        }
        accepted.push_back(latents);
    }

    result.curves.resize(static_cast<Eigen::Index>(accepted.size()), grid_size);
    result.series.resize(static_cast<Eigen::Index>(accepted.size()), grid_size);
    for (std::size_t d = 0; d < accepted.size(); ++d) {
        const auto p = curve_from_latents(opts.model, accepted[d]);
        const double sd = curve_noise_sd(p);
        for (Eigen::Index j = 0; j < grid_size; ++j) {
            const double g = eval_curve(p, opts.grid[static_cast<std::size_t>(j)]);
            result.curves(static_cast<Eigen::Index>(d), j) = g;
            result.series(static_cast<Eigen::Index>(d), j) = g + sd * normal(rng);
        }
        result.params.push_back(p);
    }
    return result;
}

}  // namespace fosemu
