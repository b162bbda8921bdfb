#include "fosemu/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fosemu/error.hpp"
#include "fosemu/random.hpp"

namespace fosemu {

IcRanges default_ic_ranges() {
    return {{{4.0, 20.0}, {7.6, 63.4}, {3.0, 10.0}, {18.5, 25.0}, {0.145e-8, 2.5e-8}}};
}

namespace {

using UnitPoints = std::vector<std::array<double, kIcCount>>;

UnitPoints latin_hypercube(int n, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    UnitPoints pts(static_cast<std::size_t>(n));
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int k = 0; k < kIcCount; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            double u = (perm[idx] + uniform(rng)) / n;
            // Keep the point inside its own bin even if rounding pushes it to the upper edge.
            u = std::min(u, std::nextafter((perm[idx] + 1.0) / n, 0.0));
            pts[idx][static_cast<std::size_t>(k)] = u;
        }
    }
    return pts;
}

double min_distance(const UnitPoints& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            double d2 = 0.0;
            for (int k = 0; k < kIcCount; ++k) {
                const double d = pts[a][static_cast<std::size_t>(k)] - pts[b][static_cast<std::size_t>(k)];
                d2 += d * d;
            }
            best = std::min(best, d2);
        }
    return std::sqrt(best);
}

double to_unit(double x, const IcRange& r) { return (x - r.lo) / (r.hi - r.lo); }

double linear(const TruthGenerator::Coefficients& c, const std::array<double, kIcCount>& u) {
    double v = c[0];
    for (int k = 0; k < kIcCount; ++k) v += c[static_cast<std::size_t>(k + 1)] * u[static_cast<std::size_t>(k)];
    return v;
}

}  // namespace

Design lhs_design(int n, const IcRanges& ranges, std::uint64_t seed, int candidates) {
    std::vector<std::string> problems;
    if (n < 1) problems.push_back(fmt::format("design size must be >= 1 (got {})", n));
    if (candidates < 1) problems.push_back(fmt::format("candidate count must be >= 1 (got {})", candidates));
    for (int k = 0; k < kIcCount; ++k) {
        const auto& r = ranges[static_cast<std::size_t>(k)];
        if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.hi > r.lo))
            problems.push_back(fmt::format("range {} is degenerate: [{}, {}]", k + 1, r.lo, r.hi));
    }
    if (!problems.empty()) {
        std::string msg = "invalid design request:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw InvalidParameter(msg);
    }

    Rng rng(stream_seed(seed, 0));
    UnitPoints best;
    double best_score = -1.0;
    for (int c = 0; c < candidates; ++c) {
        UnitPoints cand = latin_hypercube(n, rng);
        const double score = n > 1 ? min_distance(cand) : 0.0;
        if (score > best_score) {
            best_score = score;
            best = std::move(cand);
        }
    }

    Design d;
    d.seed = seed;
    d.ranges = ranges;
    for (int i = 0; i < n; ++i) {
        std::array<double, kIcCount> x{};
        for (int k = 0; k < kIcCount; ++k) {
            const auto& r = ranges[static_cast<std::size_t>(k)];
            x[static_cast<std::size_t>(k)] = r.lo + best[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * (r.hi - r.lo);
        }
        d.run_ids.push_back(i + 1);
        d.points.push_back(InitialConditions::from_array(x));
    }
    return d;
}

double min_pairwise_distance(const Design& design) {
    UnitPoints pts;
    for (const auto& p : design.points) {
        const auto x = p.to_array();
        std::array<double, kIcCount> u{};
        for (int k = 0; k < kIcCount; ++k)
            u[static_cast<std::size_t>(k)] = to_unit(x[static_cast<std::size_t>(k)], design.ranges[static_cast<std::size_t>(k)]);
        pts.push_back(u);
    }
    return min_distance(pts);
}

BSplineParams TruthGenerator::truth(const InitialConditions& x) const {
    const auto raw = x.to_array();
    std::array<double, kIcCount> u{};
    for (int k = 0; k < kIcCount; ++k) {
        const auto i = static_cast<std::size_t>(k);
        u[i] = 2.0 * to_unit(raw[i], ranges[i]) - 1.0;
    }
    BSplineParams p;
    p.a0 = linear(a0, u);
    p.a1 = p.a0 + linear(r1, u);
    p.omega = linear(omega, u);
    p.sigma = linear(sigma, u);
    if (quadratic) {
        const double g2 = p.gamma1() - 0.5 * p.gamma0();
        if (!(g2 > 0.0))
            throw InvalidParameter(fmt::format("generator '{}' gives gamma1 <= gamma0 / 2; no quadratic B-spline exists",
                                               name));
        p.a2 = std::log(g2);
    } else {
        p.a2 = p.a1 + std::min(0.0, linear(r2, u));
    }
    return p;
}

TruthGenerator TruthGenerator::preset(std::string_view name) {
    TruthGenerator g;
    g.name = std::string(name);
    // Order of slopes: height, angle, cohesion, friction, permeability. Taller and steeper
    // slopes start closer to failure and fail sooner; stronger soils last longer.
    g.a0 = {std::log(0.9), -0.10, -0.15, 0.25, 0.20, 0.0};
    g.omega = {std::log(80.0), -0.35, -0.45, 0.20, 0.15, -0.15};
    g.sigma = {std::log(0.04), 0.0, 0.0, 0.0, 0.0, 0.10};
    if (name == "bspline") {
        g.r1 = {std::log(0.8), 0.0, -0.10, 0.0, 0.0, 0.10};
        g.r2 = {std::log(0.55), -0.10, 0.0, 0.0, 0.0, 0.0};
    } else if (name == "two_regime") {
        g.r1 = {std::log(0.95), 0.0, -0.03, 0.0, 0.0, 0.0};
        g.r2 = {std::log(0.92), 0.0, 0.0, 0.0, 0.0, 0.0};
    } else if (name == "quadratic") {
        g.quadratic = true;
        g.r1 = {std::log(0.75), 0.0, -0.10, 0.0, 0.0, 0.10};
    } else {
        throw InvalidParameter(fmt::format("unknown truth generator '{}': expected one of bspline, two_regime, quadratic",
                                           name));
    }
    return g;
}

std::vector<std::string> TruthGenerator::preset_names() { return {"bspline", "two_regime", "quadratic"}; }

const RunTruth& SyntheticTruth::at(int run_id) const {
    for (const auto& r : runs)
        if (r.run_id == run_id) return r;
    throw InvalidParameter(fmt::format("run {} has no recorded truth", run_id));
}

FoSSeries simulate_series(int run_id, const BSplineParams& truth, double horizon, std::uint64_t seed) {
    FoSSeries s;
    s.run_id = run_id;
    s.censored = true;
    const double sd = truth.noise_sd();
    const auto stream = static_cast<std::uint64_t>(static_cast<std::int64_t>(run_id));
    for (int year = 0; year <= horizon; ++year) {
        const double t = year;
        const double y = eval_bspline(truth, t) + sd * keyed_normal(seed, stream, t);
        s.years.push_back(t);
        s.excess.push_back(y);
        if (y <= 0.0) {
            s.censored = false;
            break;
        }
    }
    return s;
}

SyntheticData synth_generate(const Design& design, const TruthGenerator& generator, double horizon,
                             std::uint64_t seed) {
    if (!(horizon >= 0.0)) throw InvalidParameter(fmt::format("horizon must be >= 0 (got {})", horizon));
    SyntheticData out;
    out.truth.generator = generator.name;
    out.truth.quadratic = generator.quadratic;
    out.truth.horizon = horizon;
    out.truth.seed = seed;
    for (std::size_t i = 0; i < design.size(); ++i) {
        RunTruth rt;
        rt.run_id = design.run_ids[i];
        rt.params = generator.truth(design.points[i]);
        FoSSeries s = simulate_series(rt.run_id, rt.params, horizon, seed);
        rt.end_year = s.last_year();
        rt.censored = s.censored;
        rt.observations = s.size();
        rt.dropped = s.size() < kMinObservations;
        if (!rt.dropped) out.series.push_back(std::move(s));
        out.truth.runs.push_back(rt);
    }
    return out;
}

}  // namespace fosemu
