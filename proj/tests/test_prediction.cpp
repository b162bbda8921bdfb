#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fosemu/error.hpp"
#include "fosemu/inference.hpp"
#include "fosemu/prediction.hpp"
#include "oracles.hpp"

using namespace fosemu;

namespace {

// Posterior-shaped draws for a fit on `design`: latents vary around a base curve per run,
// hyperparameters come from the prior.
PosteriorDraws fake_draws(ModelKind kind, const Eigen::MatrixXd& z, int n_draws, std::uint64_t seed) {
    const PosteriorModel layout(kind, TrainingData{z, {}});
    Rng rng(seed);
    std::normal_distribution<double> normal;
    PosteriorDraws d;
    d.names = layout.parameter_names();
    d.chains = 1;
    d.per_chain = n_draws;
    for (int s = 0; s < n_draws; ++s) {
        ModelState st;
        st.model = kind;
        st.hyper = sample_hyper_prior(kind, rng);
        st.latents.resize(z.rows(), output_count(kind));
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double base[] = {0.0, -0.4, -0.9, std::log(60.0 + 10.0 * static_cast<double>(i)), std::log(0.03)};
            int col = 0;
            for (Output o : model_outputs(kind)) {
                const double b = base[static_cast<int>(o)];
                st.latents(i, col++) = b + 0.02 * normal(rng);
            }
            if (kind == ModelKind::bspline) st.latents(i, 2) = std::min(st.latents(i, 2), st.latents(i, 1));
        }
        const auto c = layout.constrain(layout.pack(st));
        d.values.insert(d.values.end(), c.begin(), c.end());
    }
    return d;
}

std::vector<double> years(double hi, double step = 1.0) {
    std::vector<double> g;
    for (double t = 0.0; t <= hi + 1e-9; t += step) g.push_back(t);
    return g;
}

}  // namespace

TEST_CASE("GP conditioning matches joint Gaussian conditioning") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unit(-1.5, 1.5), len(0.5, 3.0), pos(0.1, 2.0);
    double worst_mean = 0.0, worst_var = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 1 + rep % 5;
        Eigen::MatrixXd z(n + 1, kIcCount);
        for (int i = 0; i <= n; ++i)
            for (int k = 0; k < kIcCount; ++k) z(i, k) = unit(rng);
        CorrelationLengths delta;
        for (auto& d : delta) d = len(rng);
        Eigen::VectorXd beta(6);
        for (int k = 0; k < 6; ++k) beta(k) = unit(rng);
        const double tau = pos(rng);
        const double nugget = 1e-6;

        Eigen::MatrixXd cov(n + 1, n + 1);
        Eigen::VectorXd mean(n + 1);
        for (int i = 0; i <= n; ++i) {
            double m = beta(0);
            for (int k = 0; k < kIcCount; ++k) m += beta(k + 1) * z(i, k);
            mean(i) = m;
            for (int j = 0; j <= n; ++j) {
                double q = 0.0;
                for (int k = 0; k < kIcCount; ++k) q += std::pow((z(i, k) - z(j, k)) / delta[k], 2);
                cov(i, j) = tau * (std::exp(-q) + (i == j ? nugget : 0.0));
            }
        }
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = mean(i) + unit(rng);
        const auto expected = oracle::condition_joint(mean, cov, y);
        std::vector<double> zs(kIcCount);
        for (int k = 0; k < kIcCount; ++k) zs[k] = z(n, k);
        const auto got = condition_latent(y, z.topRows(n), beta, tau, delta, nugget, zs);
        worst_mean = std::max(worst_mean, std::abs(got.mean - expected.mean));
        worst_var = std::max(worst_var, std::abs(got.variance - expected.variance));
    }
    CHECK(worst_mean < 1e-8);
    CHECK(worst_var < 1e-8);
}

TEST_CASE("conditioning interpolates without a nugget") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::MatrixXd z(4, kIcCount);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < kIcCount; ++k) z(i, k) = unit(rng);
    const CorrelationLengths delta{1.0, 1.2, 0.8, 1.5, 2.0};
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
    beta(0) = 0.3;
    const Eigen::Vector4d y(0.1, -0.5, 0.9, 0.2);
    const LatentConditioner cond(z, delta, 0.0);
    for (int i = 0; i < 4; ++i) {
        std::vector<double> zs;
        for (int k = 0; k < kIcCount; ++k) zs.push_back(z(i, k));
        const auto m = cond.condition(y, beta, 0.7, zs);
        CHECK(std::abs(m.mean - y(i)) < 1e-8);
        CHECK(m.variance < 1e-8);
    }
}

TEST_CASE("repeated inputs without a nugget cannot be factorized") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, kIcCount);
    const CorrelationLengths delta{1, 1, 1, 1, 1};
    CHECK_THROWS_AS(LatentConditioner(z, delta, 0.0), NumericalError);
    CHECK_NOTHROW(LatentConditioner(z, delta, 1e-6));
}

TEST_CASE("FoS band from known curves") {
    const std::vector<CurveParams> curves(50, BSplineParams::from_constrained(1.0, 0.8, 0.5, 40.0, 0.05));
    const auto grid = years(60);
    const auto band = fos_band(curves, grid, {});
    for (std::size_t j = 0; j < grid.size(); ++j) {
        CHECK(band.lo95[j] <= band.mean[j]);
        CHECK(band.mean[j] <= band.hi95[j]);
        if (grid[j] >= 40.0) CHECK(band.curve_mean[j] == 1.0);
    }
    CHECK(band.curve_mean[0] == doctest::Approx(2.0));
    CHECK_FALSE(band.samples.has_value());
    CHECK_THROWS_AS(fos_band(std::span<const CurveParams>{}, grid, {}), InvalidParameter);

    PredictionOptions keep;
    keep.keep_samples = true;
    const auto with = fos_band(curves, grid, keep);
    REQUIRE(with.samples.has_value());
    CHECK(with.samples->rows() == 50);
    CHECK(with.mean == band.mean);
}

TEST_CASE("band noise is stable under grid refinement") {
    const std::vector<CurveParams> curves(20, QuadraticParams::from_constrained(1.0, 0.7, 50.0, 0.1));
    PredictionOptions opts;
    opts.keep_samples = true;
    const auto coarse = fos_band(curves, years(50, 5.0), opts);
    const auto fine = fos_band(curves, years(50, 1.0), opts);
    for (Eigen::Index d = 0; d < 20; ++d)
        for (Eigen::Index j = 0; j < coarse.samples->cols(); ++j) CHECK((*coarse.samples)(d, j) == (*fine.samples)(d, 5 * j));
}

TEST_CASE("failure time scan") {
    const CurveParams quiet = QuadraticParams::from_constrained(1.0, 0.5, 30.5, 1e-9);
    CHECK(first_failure_time(quiet, 1, 0, 1.0) == 31.0);
    CHECK(first_failure_time(quiet, 1, 0, 0.5) == 30.5);
    CHECK_THROWS_AS(first_failure_time(quiet, 1, 0, 0.0), InvalidParameter);

    const CurveParams noisy = QuadraticParams::from_constrained(0.3, 0.2, 80.0, 0.2);
    int early = 0;
    for (std::uint64_t d = 0; d < 200; ++d) {
        const double rho = first_failure_time(noisy, 9, d, 1.0);
        CHECK(rho > 0.0);
        CHECK(rho <= 80.0);
        early += rho < 80.0;
    }
    CHECK(early > 100);

    const std::vector<CurveParams> curves{quiet, noisy};
    const auto ttf = ttf_distribution(curves, {});
    CHECK(ttf.omega[0] == doctest::Approx(30.5));
    CHECK(ttf.rho[0] == 31.0);
    CHECK(ttf.rho_quantile(1.0) == 31.0);
}

TEST_CASE("in-sample bands and TTF read the run's draws") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Random(3, kIcCount);
    const auto draws = fake_draws(ModelKind::bspline, z, 200, 4);
    const auto curves = run_curves(draws, ModelKind::bspline, 2);
    REQUIRE(curves.size() == 200);
    CHECK(curve_ttf(curves[0]) == doctest::Approx(70.0).epsilon(0.1));
    CHECK_THROWS_AS(run_curves(draws, ModelKind::bspline, 7), InvalidParameter);

    const auto grid = years(100);
    const auto band = posterior_fos(draws, ModelKind::bspline, 2, grid);
    CHECK(band.curve_mean.back() == 1.0);
    const auto ttf = predicted_ttf(draws, ModelKind::bspline, 2);
    CHECK(ttf.rho.size() == 200);
    for (std::size_t d = 0; d < ttf.rho.size(); ++d) CHECK(ttf.rho[d] <= std::ceil(ttf.omega[d]));

    PredictionOptions a, b;
    a.threads = 1;
    b.threads = 3;
    CHECK(predicted_ttf(draws, ModelKind::bspline, 2, a).rho == predicted_ttf(draws, ModelKind::bspline, 2, b).rho);
}

TEST_CASE("out-of-sample prediction at a training input reproduces the in-sample band") {
    const std::vector<InitialConditions> design{{20, 30, 5, 25, 1e-7}, {30, 45, 10, 30, 2e-7}, {40, 20, 15, 35, 5e-8}};
    const auto stats = StandardizationStats::from_training(design);
    const auto z = standardize_design(design, stats);
    for (ModelKind kind : {ModelKind::quadratic, ModelKind::bspline}) {
        const auto draws = fake_draws(kind, z, 100, 6);
        const auto grid = years(90);
        const auto oos = predict_out_of_sample(draws, kind, z, stats, design[1], grid, 0.0);
        CHECK(oos.skipped == 0);
        const auto in = posterior_fos(draws, kind, 2, grid);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            CHECK(oos.band.mean[j] == doctest::Approx(in.mean[j]).epsilon(1e-6));
            CHECK(oos.band.lo95[j] == doctest::Approx(in.lo95[j]).epsilon(1e-6));
            CHECK(oos.band.hi95[j] == doctest::Approx(in.hi95[j]).epsilon(1e-6));
        }
    }
}

TEST_CASE("out-of-sample prediction elsewhere") {
    const std::vector<InitialConditions> design{{20, 30, 5, 25, 1e-7}, {30, 45, 10, 30, 2e-7}, {40, 20, 15, 35, 5e-8},
                                                {25, 35, 8, 28, 3e-7}};
    const auto stats = StandardizationStats::from_training(design);
    const auto z = standardize_design(design, stats);
    const auto draws = fake_draws(ModelKind::bspline, z, 150, 8);
    const auto grid = years(120);
    const InitialConditions x{28, 33, 9, 29, 1.5e-7};
    const auto a = predict_out_of_sample(draws, ModelKind::bspline, z, stats, x, grid);
    CHECK(a.curves.size() + static_cast<std::size_t>(a.skipped) == 150);
    for (const auto& c : a.curves) CHECK(check_constraints(std::get<BSplineParams>(c)).ok);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(a.band.lo95[j] <= a.band.hi95[j]);

    PredictionOptions threaded;
    threaded.threads = 4;
    const auto b = predict_out_of_sample(draws, ModelKind::bspline, z, stats, x, grid, kDefaultNugget, threaded);
    CHECK(a.band.mean == b.band.mean);
    CHECK(a.ttf.rho == b.ttf.rho);

    CHECK_THROWS_AS(predict_out_of_sample(draws, ModelKind::quadratic, z, stats, x, grid), InvalidParameter);
}
