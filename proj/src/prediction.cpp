#include "fosemu/prediction.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "fosemu/error.hpp"
#include "fosemu/inference.hpp"
#include "fosemu/stats.hpp"
#include "parallel.hpp"

namespace fosemu {

namespace {

constexpr std::uint64_t kBandStream = 0x62616e64;
constexpr std::uint64_t kTtfStream = 0x747466;
constexpr std::uint64_t kConditionStream = 0x636f6e64;
constexpr double kVarianceClamp = 1e-12;

double sorted_quantile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    return stats::quantile_sorted(v, p);
}

}  // namespace

double TTFDistribution::rho_quantile(double p) const { return stats::quantile(rho, p); }
double TTFDistribution::omega_quantile(double p) const { return stats::quantile(omega, p); }

std::vector<CurveParams> run_curves(const PosteriorDraws& draws, ModelKind kind, int run_id) {
    std::vector<std::size_t> cols;
    for (Output o : model_outputs(kind)) {
        const auto name = fmt::format("{}[{}]", output_name(o), run_id);
        const auto idx = draws.index_of(name);
        if (!idx) throw InvalidParameter(fmt::format("run {} is not part of the fitted data", run_id));
        cols.push_back(*idx);
    }
    std::vector<CurveParams> out;
    out.reserve(draws.total());
    std::vector<double> latents(cols.size());
    for (std::size_t d = 0; d < draws.total(); ++d) {
        const auto row = draws.row(d);
        for (std::size_t k = 0; k < cols.size(); ++k) latents[k] = row[cols[k]];
        out.push_back(curve_from_latents(kind, latents));
    }
    return out;
}

PredictionBand fos_band(std::span<const CurveParams> curves, std::span<const double> grid,
                        const PredictionOptions& opts) {
    if (curves.empty()) throw InvalidParameter("no curve draws to summarize");
    const auto n_draws = static_cast<Eigen::Index>(curves.size());
    const auto n_grid = static_cast<Eigen::Index>(grid.size());
    const std::uint64_t noise_seed = stream_seed(opts.seed, kBandStream);
    Eigen::MatrixXd noisy(n_draws, n_grid);
    Eigen::MatrixXd clean(n_draws, n_grid);
    for (Eigen::Index d = 0; d < n_draws; ++d) {
        const auto& c = curves[static_cast<std::size_t>(d)];
        const double sd = curve_noise_sd(c);
        for (Eigen::Index j = 0; j < n_grid; ++j) {
            const double t = grid[static_cast<std::size_t>(j)];
            clean(d, j) = 1.0 + eval_curve(c, t);
            noisy(d, j) = clean(d, j) + sd * keyed_normal(noise_seed, static_cast<std::uint64_t>(d), t);
        }
    }
    PredictionBand band;
    band.grid.assign(grid.begin(), grid.end());
    std::vector<double> col(static_cast<std::size_t>(n_draws));
    for (Eigen::Index j = 0; j < n_grid; ++j) {
        for (Eigen::Index d = 0; d < n_draws; ++d) col[static_cast<std::size_t>(d)] = noisy(d, j);
        band.mean.push_back(stats::mean(col));
        band.lo95.push_back(sorted_quantile(col, 0.025));
        band.hi95.push_back(sorted_quantile(col, 0.975));
        band.curve_mean.push_back(clean.col(j).mean());
    }
    if (opts.keep_samples) band.samples = std::move(noisy);
    return band;
}

double first_failure_time(const CurveParams& curve, std::uint64_t seed, std::uint64_t draw, double step) {
    if (!(step > 0.0)) throw InvalidParameter("failure scan step must be positive");
    const double omega = curve_ttf(curve);
    const double sd = curve_noise_sd(curve);
    for (long long k = 1;; ++k) {
        const double t = static_cast<double>(k) * step;
        if (t >= omega) return t;
        const double g = eval_curve(curve, t);
        if (g <= 0.0 || g + sd * keyed_normal(seed, draw, t) <= 0.0) return t;
    }
}

TTFDistribution ttf_distribution(std::span<const CurveParams> curves, const PredictionOptions& opts) {
    TTFDistribution out;
    out.step = opts.ttf_step;
    const std::uint64_t noise_seed = stream_seed(opts.seed, kTtfStream);
    out.rho.resize(curves.size());
    out.omega.resize(curves.size());
    detail::parallel_for(curves.size(), opts.threads, [&](std::size_t d) {
        out.omega[d] = curve_ttf(curves[d]);
        out.rho[d] = first_failure_time(curves[d], noise_seed, d, opts.ttf_step);
    });
    return out;
}

PredictionBand posterior_fos(const PosteriorDraws& draws, ModelKind kind, int run_id, std::span<const double> grid,
                             const PredictionOptions& opts) {
    const auto curves = run_curves(draws, kind, run_id);
    return fos_band(curves, grid, opts);
}

TTFDistribution predicted_ttf(const PosteriorDraws& draws, ModelKind kind, int run_id,
                              const PredictionOptions& opts) {
    const auto curves = run_curves(draws, kind, run_id);
    return ttf_distribution(curves, opts);
}

LatentConditioner::LatentConditioner(Eigen::MatrixXd z_design, const CorrelationLengths& delta, double nugget)
    : z_(std::move(z_design)), h_(regressor_matrix(z_)), delta_(delta), nugget_(nugget) {
    llt_.compute(correlation_matrix(z_, delta_, nugget_));
    if (llt_.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "Cholesky factorization of the {}x{} training correlation matrix failed (nugget {}); "
            "increase the nugget or remove repeated inputs",
            z_.rows(), z_.rows(), nugget_));
}

NormalMoments LatentConditioner::condition(const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double tau,
                                           std::span<const double> z_star) const {
    const Eigen::Index n = z_.rows();
    if (y.size() != n) throw InvalidParameter(fmt::format("{} training values for {} inputs", y.size(), n));
    Eigen::VectorXd t(n);
    std::vector<double> zi(kIcCount);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < kIcCount; ++k) zi[static_cast<std::size_t>(k)] = z_(i, k);
        t(i) = correlation(z_star, zi, delta_, 0.0);
    }
    const Eigen::VectorXd resid = y - h_ * beta;
    const Eigen::VectorXd solved = llt_.solve(t);
    NormalMoments m;
    m.mean = regressor(z_star).dot(beta) + solved.dot(resid);
    double v = tau * (1.0 + nugget_ - t.dot(solved));
    if (v < 0.0) {
        if (v < -kVarianceClamp)
            throw NumericalError(fmt::format("conditional variance {} is negative; the training correlation "
                                             "matrix is ill-conditioned, increase the nugget",
                                             v));
        v = 0.0;
    }
    m.variance = v;
    return m;
}

NormalMoments condition_latent(const Eigen::VectorXd& y, const Eigen::MatrixXd& z_design, const Eigen::VectorXd& beta,
                               double tau, const CorrelationLengths& delta, double nugget,
                               std::span<const double> z_star) {
    return LatentConditioner(z_design, delta, nugget).condition(y, beta, tau, z_star);
}

OutOfSamplePrediction predict_out_of_sample(const PosteriorDraws& draws, ModelKind kind,
                                            const Eigen::MatrixXd& z_training, const StandardizationStats& stats,
                                            const InitialConditions& x_star, std::span<const double> grid,
                                            double nugget, const PredictionOptions& opts) {
    const PosteriorModel layout(kind, TrainingData{z_training, {}}, nugget);
    if (draws.parameters() != layout.dimension())
        throw InvalidParameter(fmt::format("draws have {} parameters but a {}-run {} fit has {}", draws.parameters(),
                                           z_training.rows(), to_string(kind), layout.dimension()));
    const StandardizedIc z_star = standardize(x_star, stats);
    const int n_out = layout.outputs();
    const auto a1_col = output_column(kind, Output::a1);
    const auto a2_col = output_column(kind, Output::a2);

    std::vector<std::optional<CurveParams>> produced(draws.total());
    detail::parallel_for(draws.total(), opts.threads, [&](std::size_t d) {
        Rng rng(stream_seed(stream_seed(opts.seed, kConditionStream), d));
        std::normal_distribution<double> normal;
        const auto row = draws.row(d);
        const ModelState state = layout.unpack(layout.unconstrain(row));
        const LatentConditioner cond(z_training, state.hyper.delta, nugget);

        std::vector<NormalMoments> moments(static_cast<std::size_t>(n_out));
        std::vector<double> latents(static_cast<std::size_t>(n_out));
        for (int l = 0; l < n_out; ++l) {
            moments[static_cast<std::size_t>(l)] =
                cond.condition(state.latents.col(l), state.hyper.beta.col(l), state.hyper.tau(l), z_star);
            const auto& m = moments[static_cast<std::size_t>(l)];
            latents[static_cast<std::size_t>(l)] = m.mean + std::sqrt(m.variance) * normal(rng);
        }
        if (a2_col) {
            const auto i1 = static_cast<std::size_t>(*a1_col);
            const auto i2 = static_cast<std::size_t>(*a2_col);
            const auto& m2 = moments[i2];
            int tries = 0;
            while (latents[i2] > latents[i1] && tries < kMaxConstraintResamples) {
                latents[i2] = m2.mean + std::sqrt(m2.variance) * normal(rng);
                ++tries;
            }
            if (latents[i2] > latents[i1]) return;
        }
        produced[d] = curve_from_latents(kind, latents);
    });

    OutOfSamplePrediction out;
    for (auto& p : produced) {
        if (p)
            out.curves.push_back(*p);
        else
            ++out.skipped;
    }
    if (out.curves.empty())
        throw InvalidParameter("every posterior draw violated the curve constraint after resampling");
    out.band = fos_band(out.curves, grid, opts);
    out.ttf = ttf_distribution(out.curves, opts);
    return out;
}

}  // namespace fosemu
