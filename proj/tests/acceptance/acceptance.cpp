// Acceptance suite: one PASS/FAIL line per criterion. Criteria 8-10 and 12 drive the
// command-line tool given by --bin; the rest call the library directly.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "fosemu/experiment.hpp"
#include "fosemu/fos_models.hpp"
#include "fosemu/gp_emulator.hpp"
#include "fosemu/inference.hpp"
#include "fosemu/io.hpp"
#include "fosemu/prediction.hpp"
#include "fosemu/scoring.hpp"
#include "fosemu/stats.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace fosemu;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string g_bin;
fs::path g_work;

int shell(const std::string& args, const std::string& log) {
    const std::string cmd = fmt::format("'{}' {} >> '{}' 2>&1", g_bin, args, (g_work / log).string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

double sorted_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    return stats::quantile_sorted(v, p);
}

Outcome prior_reproduction() {
    Rng rng(2024);
    std::vector<double> omega, gamma0, sigma;
    for (int i = 0; i < 100000; ++i) {
        const auto h = sample_hyper_prior(ModelKind::bspline, rng);
        gamma0.push_back(std::exp(h.beta(0, 0)) + 1.0);
        omega.push_back(std::exp(h.beta(0, 3)));
        sigma.push_back(std::exp(h.beta(0, 4)));
    }
    struct Target {
        const char* name;
        const std::vector<double>* v;
        double median, lo, hi;
    };
    const Target targets[] = {{"omega", &omega, 191.0, 26.8, 1350.0},
                              {"FoS(0)", &gamma0, 2.00, 1.38, 3.66},
                              {"sigma", &sigma, 0.100, 0.0375, 0.266}};
    bool ok = true;
    std::string detail;
    for (const auto& t : targets) {
        const double m = sorted_quantile(*t.v, 0.5), lo = sorted_quantile(*t.v, 0.025), hi = sorted_quantile(*t.v, 0.975);
        ok = ok && std::abs(m / t.median - 1) <= 0.03 && std::abs(lo / t.lo - 1) <= 0.05 && std::abs(hi / t.hi - 1) <= 0.05;
        detail += fmt::format("{} {:.4g} ({:.4g}, {:.4g}); ", t.name, m, lo, hi);
    }
    return {ok, detail};
}

Outcome de_boor_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> g(0.05, 3.0), w(1.0, 300.0), u(0.0, 1.0), c(-2.0, 2.0);
    double worst_three = 0.0, worst_four = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double g0 = g(rng), g1 = g(rng), g2 = g(rng), omega = w(rng), t = u(rng) * omega;
        const KnotVector kv(omega, 1);
        const double coef[] = {g0, g1, g2, 0.0};
        worst_three = std::max(worst_three, std::abs(bspline_combination(kv, coef, t) - oracle::spline(g0, g1, g2, omega, t)));
        const auto p = BSplineParams::from_constrained(g0, g1, g2, omega, 0.1);
        worst_three = std::max(worst_three, std::abs(bspline_combination(kv, coef, t) - eval_bspline(p, t)));

        const double gen[] = {c(rng), c(rng), c(rng), c(rng)};
        worst_four = std::max(worst_four, std::abs(bspline_combination(kv, gen, t) -
                                                   oracle::spline_general(gen[0], gen[1], gen[2], gen[3], omega, t)));
    }
    return {worst_three < 1e-10 && worst_four < 1e-10,
            fmt::format("max |diff| {:.2e} (three coefficients), {:.2e} (four)", worst_three, worst_four)};
}

Outcome knot_continuity() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> g(0.05, 3.0), w(1.0, 300.0), frac(1e-3, 1.0);
    double knot = 0.0, start = 0.0, end = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double g1 = g(rng);
        const auto p = BSplineParams::from_constrained(g(rng), g1, g1 * frac(rng), w(rng), 0.1);
        const double mid = 0.5 * (p.gamma1() + p.gamma2());
        knot = std::max({knot, std::abs(bspline_piece(p, 0, p.knot()) - mid), std::abs(bspline_piece(p, 1, p.knot()) - mid)});
        start = std::max(start, std::abs(eval_bspline(p, 0.0) - p.gamma0()));
        const auto q = QuadraticParams{p.a0, p.a1, p.omega, p.sigma};
        end = std::max({end, std::abs(bspline_piece(p, 1, p.ttf())), std::abs(quadratic_polynomial(q, q.ttf()))});
    }
    return {knot <= 1e-12 && start == 0.0 && end <= 1e-10,
            fmt::format("knot {:.2e}, start {:.2e}, end {:.2e}", knot, start, end)};
}

Outcome collapse_identity() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> g(0.05, 3.0), w(1.0, 300.0);
    double worst = 0.0;
    int collapsed = 0;
    for (int i = 0; i < 1000; ++i) {
        const double g0 = g(rng);
        const double g1 = 0.5 * g0 + g(rng);
        const auto b = BSplineParams::from_constrained(g0, g1, g1 - 0.5 * g0, w(rng), 0.1);
        const auto q = collapse_to_quadratic(b);
        if (!q) continue;
        ++collapsed;
        for (int j = 0; j <= 100; ++j) {
            const double t = b.ttf() * j / 100.0;
            worst = std::max(worst, std::abs(eval_bspline(b, t) - eval_quadratic(*q, t)));
        }
    }
    return {collapsed == 1000 && worst < 1e-12, fmt::format("{} collapsed, max |diff| {:.2e}", collapsed, worst)};
}

Outcome gp_conditioning() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.5, 1.5), len(0.5, 3.0), pos(0.1, 2.0);
    double worst = 0.0, interp = 0.0;
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
            mean(i) = beta(0) + z.row(i).dot(beta.tail(5));
            for (int j = 0; j <= n; ++j) {
                double qd = 0.0;
                for (int k = 0; k < kIcCount; ++k) qd += std::pow((z(i, k) - z(j, k)) / delta[k], 2);
                cov(i, j) = tau * (std::exp(-qd) + (i == j ? nugget : 0.0));
            }
        }
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = mean(i) + unit(rng);
        const auto want = oracle::condition_joint(mean, cov, y);
        std::vector<double> zs;
        for (int k = 0; k < kIcCount; ++k) zs.push_back(z(n, k));
        const auto got = condition_latent(y, z.topRows(n), beta, tau, delta, nugget, zs);
        worst = std::max({worst, std::abs(got.mean - want.mean), std::abs(got.variance - want.variance)});

        const LatentConditioner exact(z.topRows(n), delta, 0.0);
        for (int i = 0; i < n; ++i) {
            std::vector<double> zi;
            for (int k = 0; k < kIcCount; ++k) zi.push_back(z(i, k));
            const auto m = exact.condition(y, beta, tau, zi);
            interp = std::max({interp, std::abs(m.mean - y(i)), std::abs(m.variance)});
        }
    }
    return {worst < 1e-8 && interp < 1e-8, fmt::format("max |diff| {:.2e}, interpolation error {:.2e}", worst, interp)};
}

Outcome crps_oracle() {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal(0.3, 1.7);
    std::vector<double> big(100000);
    for (auto& x : big) x = normal(rng);
    const double emp = crps_empirical(big, 1.2), exact = crps_gaussian(0.3, 1.7, 1.2);
    const double rel = std::abs(emp / exact - 1.0);
    std::vector<double> small(big.begin(), big.begin() + 2000);
    const double diff = std::abs(crps_empirical(small, 1.2) - oracle::crps_double_sum(small, 1.2));
    return {rel < 0.01 && diff < 1e-10, fmt::format("relative error {:.2e} at M=1e5, sorted vs double sum {:.2e}", rel, diff)};
}

Outcome gradient_check() {
    const auto design = lhs_design(6, default_ic_ranges(), 7);
    const auto data = synth_generate(design, TruthGenerator::preset("bspline"), 60.0, 7);
    std::vector<InitialConditions> xs;
    for (const auto& s : data.series) xs.push_back(design.points[static_cast<std::size_t>(s.run_id - 1)]);
    const auto stats = StandardizationStats::from_training(xs);
    double worst = 0.0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    int points = 0;
    for (ModelKind kind : {ModelKind::quadratic, ModelKind::bspline}) {
        const PosteriorModel m(kind, TrainingData{standardize_design(xs, stats), data.series});
        while (points < (kind == ModelKind::quadratic ? 10 : 20)) {
            auto theta = m.pack(m.initial_state());
            for (auto& v : theta) v += jitter(rng);
            if (!std::isfinite(m.log_density(theta))) continue;
            std::vector<double> grad(theta.size());
            m.log_density_gradient(theta, grad);
            const auto fd = oracle::finite_difference([&](const std::vector<double>& x) { return m.log_density(x); }, theta);
            for (std::size_t j = 0; j < theta.size(); ++j)
                worst = std::max(worst, std::abs(grad[j] - fd[j]) / std::max(1.0, std::abs(fd[j])));
            ++points;
        }
    }
    return {worst < 1e-5, fmt::format("max relative error {:.2e} over {} points", worst, points)};
}

// Shared by criteria 8 and 9: 25 B-spline runs, the first 20 fitted.
Outcome recovery_and_holdout(Outcome& holdout) {
    const fs::path dir = g_work / "recovery";
    if (shell(fmt::format("simulate --n 25 --seed 11 --truth bspline --out-dir {}", q(dir / "data")), "recovery.log") != 0 ||
        shell(fmt::format("fit --design {} --series {} --holdout 21-25 --model bspline --chains 4 --iterations 2000 "
                          "--warmup 1000 --seed 12 --out-dir {}",
                          q(dir / "data/design.csv"), q(dir / "data/series.csv"), q(dir / "fit")),
              "recovery.log") != 0) {
        holdout = {false, "fit failed, see recovery.log"};
        return {false, "fit failed, see recovery.log"};
    }
    const auto truth = io::read_truth(dir / "data/truth.json");
    const auto summary = nlohmann::json::parse(io::read_text(dir / "fit/summary.json"));
    std::map<std::string, nlohmann::json> params;
    for (const auto& p : summary["parameters"]) params[p["name"].get<std::string>()] = p;
    int covered = 0, runs = 0;
    for (const auto& r : truth.runs) {
        if (r.run_id > 20 || r.dropped) continue;
        ++runs;
        auto inside = [&](const std::string& name, double value) {
            const auto& p = params.at(name);
            return p["q2.5"].get<double>() <= value && value <= p["q97.5"].get<double>();
        };
        covered += inside(fmt::format("A0[{}]", r.run_id), r.params.a0) &&
                   inside(fmt::format("Omega[{}]", r.run_id), r.params.omega);
    }
    double worst_hyper = 0.0;
    bool hyper_ok = true;
    for (const auto& [name, p] : params) {
        if (name.find('[') != std::string::npos && name.rfind("beta_", 0) != 0 && name.rfind("delta", 0) != 0) continue;
        if (p["rhat"].is_null()) continue;
        const double r = p["rhat"].get<double>();
        worst_hyper = std::max(worst_hyper, r);
        if (r >= 1.05 && !p["multimodal"].get<bool>()) hyper_ok = false;
    }

    if (shell(fmt::format("validate --archive {} --design {} --series {} --holdout 21-25 --out-dir {}",
                          q(dir / "fit/archive.json"), q(dir / "data/design.csv"), q(dir / "data/series.csv"),
                          q(dir / "validate")),
              "recovery.log") != 0) {
        holdout = {false, "validate failed, see recovery.log"};
    } else {
        const auto v = nlohmann::json::parse(io::read_text(dir / "validate/validation.json"));
        const double cov = v["coverage95"].get<double>();
        holdout = {cov >= 0.85 && cov <= 0.99,
                   fmt::format("coverage {:.3f} over {} held-out observations", cov, v["observations"].get<int>())};
    }
    return {covered >= 17 && runs == 20 && hyper_ok,
            fmt::format("{}/{} runs covered, max hyperparameter R-hat {:.3f}, {} divergences", covered, runs, worst_hyper,
                        summary["divergences"].get<int>())};
}

// Median per-run CRPS difference between quadratic and B-spline fits of one synthetic truth.
bool compare_on(const std::string& truth, double& delta, double& bspline_median) {
    const fs::path dir = g_work / ("compare_" + truth);
    if (shell(fmt::format("simulate --n 20 --seed 7 --truth {} --out-dir {}", truth, q(dir / "data")), "compare.log") != 0)
        return false;
    for (const char* model : {"quadratic", "bspline"}) {
        if (shell(fmt::format("fit --design {} --series {} --model {} --seed 13 --out-dir {}", q(dir / "data/design.csv"),
                              q(dir / "data/series.csv"), model, q(dir / model)),
                  "compare.log") != 0 ||
            shell(fmt::format("score --archive {} --series {} --out-dir {} --out scores.csv", q(dir / model / "archive.json"),
                              q(dir / "data/series.csv"), q(dir / model)),
                  "compare.log") != 0)
            return false;
    }
    const auto first = io::read_scores(dir / "quadratic/scores.csv");
    const auto second = io::read_scores(dir / "bspline/scores.csv");
    delta = compare_models(first, second).median_delta_crps();
    bspline_median = median_run_crps(second);
    return true;
}

Outcome model_comparison() {
    double d2 = 0, m2 = 0, dq = 0, mq = 0;
    if (!compare_on("two_regime", d2, m2) || !compare_on("quadratic", dq, mq)) return {false, "a fit failed, see compare.log"};
    return {d2 > 0.0 && std::abs(dq) < 0.1 * mq,
            fmt::format("two-regime median dCRPS {:.3g}; quadratic |median dCRPS| {:.3g} vs 10% of {:.3g}", d2,
                        std::abs(dq), mq)};
}

Outcome lhs_stratification() {
    const auto ranges = default_ic_ranges();
    bool ok = true;
    for (int n : {10, 75}) {
        const auto d = lhs_design(n, ranges, 100 + static_cast<std::uint64_t>(n));
        for (int k = 0; k < kIcCount; ++k) {
            std::vector<int> count(static_cast<std::size_t>(n), 0);
            for (const auto& p : d.points) {
                const double v = p.to_array()[static_cast<std::size_t>(k)];
                const auto r = ranges[static_cast<std::size_t>(k)];
                ok = ok && v >= r.lo && v <= r.hi;
                const int bin = std::clamp(static_cast<int>(std::floor((v - r.lo) / (r.hi - r.lo) * n)), 0, n - 1);
                ++count[static_cast<std::size_t>(bin)];
            }
            ok = ok && std::all_of(count.begin(), count.end(), [](int c) { return c == 1; });
        }
    }
    return {ok, "n = 10 and 75, every bin occupied once in every dimension"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
    return files;
}

Outcome pipeline_determinism() {
    std::vector<std::map<std::string, std::string>> runs;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = g_work / fmt::format("pipeline{}", rep);
        fs::remove_all(dir);
        const std::string log = "pipeline.log";
        const bool ok =
            shell(fmt::format("design --n 10 --seed 21 --out-dir {}", q(dir)), log) == 0 &&
            shell(fmt::format("simulate --design {} --seed 22 --out-dir {}", q(dir / "design.csv"), q(dir)), log) == 0 &&
            shell(fmt::format("fit --design {} --series {} --holdout 10 --chains 2 --iterations 300 --warmup 150 "
                              "--seed 23 --out-dir {}",
                              q(dir / "design.csv"), q(dir / "series.csv"), q(dir / "fit")),
                  log) == 0 &&
            shell(fmt::format("diagnose --draws {} --out-dir {}", q(dir / "fit/draws.jsonl"), q(dir / "diag")), log) == 0 &&
            shell(fmt::format("predict --archive {} --runs 1,10 --design {} --out-dir {}", q(dir / "fit/archive.json"),
                              q(dir / "design.csv"), q(dir / "predict")),
                  log) == 0 &&
            shell(fmt::format("validate --archive {} --design {} --series {} --out-dir {}", q(dir / "fit/archive.json"),
                              q(dir / "design.csv"), q(dir / "series.csv"), q(dir / "validate")),
                  log) == 0 &&
            shell(fmt::format("plotdata --archive {} --series {} --runs 2 --svg --out-dir {}", q(dir / "fit/archive.json"),
                              q(dir / "series.csv"), q(dir / "plot")),
                  log) == 0;
        if (!ok) return {false, "a pipeline step failed, see pipeline.log"};
        runs.push_back(snapshot(dir));
    }
    return {runs[0] == runs[1], fmt::format("{} output files compared", runs[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--bin") g_bin = argv[i + 1];
    if (g_bin.empty()) {
        std::cerr << "usage: acceptance --bin <path to fosemu>\n";
        return 2;
    }
    g_work = fs::temp_directory_path() / fmt::format("fosemu_acceptance_{}", ::getpid());
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    int failures = 0;
    auto report = [&](int id, const char* title, const std::function<Outcome()>& check) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        fmt::print("{} {:>2} {}: {} [{:.1f}s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail, secs);
        std::fflush(stdout);
    };

    report(1, "prior reproduction", prior_reproduction);
    report(2, "recursive basis vs closed forms", de_boor_oracle);
    report(3, "knot continuity and boundaries", knot_continuity);
    report(4, "B-spline to quadratic collapse", collapse_identity);
    report(5, "GP conditioning oracle", gp_conditioning);
    report(6, "CRPS oracle", crps_oracle);
    report(7, "gradient check", gradient_check);
    Outcome holdout{false, "not run"};
    report(8, "parameter recovery", [&] { return recovery_and_holdout(holdout); });
    report(9, "held-out validation", [&] { return holdout; });
    report(10, "model comparison direction", model_comparison);
    report(11, "LHS stratification", lhs_stratification);
    report(12, "pipeline determinism", pipeline_determinism);

    if (failures == 0) fs::remove_all(g_work);
    else fmt::print("work files kept in {}\n", g_work.string());
    fmt::print("{} of 12 criteria passed\n", 12 - failures);
    return failures == 0 ? 0 : 1;
}
