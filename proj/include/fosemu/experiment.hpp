#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fosemu/data.hpp"
#include "fosemu/fos_models.hpp"
#include "fosemu/gp_emulator.hpp"

namespace fosemu {

struct IcRange {
    double lo = 0.0;
    double hi = 0.0;
};
using IcRanges = std::array<IcRange, kIcCount>;

/// Height (m), angle (deg), cohesion (kPa), friction angle (deg), permeability (m/s).
IcRanges default_ic_ranges();

struct Design {
    std::vector<int> run_ids;
    std::vector<InitialConditions> points;
    std::uint64_t seed = 0;
    IcRanges ranges{};

    std::size_t size() const { return points.size(); }
};

inline constexpr int kMaximinCandidates = 50;

/// Latin hypercube with one point per equal-width bin in every dimension, placed uniformly
/// within its cell. Of `candidates` seeded hypercubes the one with the largest minimum
/// pairwise distance (unit-cube coordinates) is kept. Run ids are 1..n.
Design lhs_design(int n, const IcRanges& ranges, std::uint64_t seed, int candidates = kMaximinCandidates);

/// Smallest Euclidean distance between two points of the design, after mapping the
/// ranges onto the unit cube. Infinity for fewer than two points.
double min_pairwise_distance(const Design& design);

/// Log-linear map from initial conditions to true curve parameters.
///
/// Each IC is first scaled to u in [-1, 1] over `ranges`. Then
///   A0    = a0[0]    + sum_k a0[k+1] u_k
///   A1    = A0 + r1[0] + sum_k r1[k+1] u_k
///   A2    = A1 + r2[0] + sum_k r2[k+1] u_k        (B-spline shapes)
///   Omega = omega[0] + sum_k omega[k+1] u_k
///   Sigma = sigma[0] + sum_k sigma[k+1] u_k
/// In quadratic mode A2 is ignored and gamma2 = gamma1 - gamma0 / 2, which makes the
/// spline an exact quadratic; r1 must then keep gamma1 above gamma0 / 2.
struct TruthGenerator {
    using Coefficients = std::array<double, kIcCount + 1>;

    std::string name;
    bool quadratic = false;
    IcRanges ranges = default_ic_ranges();
    Coefficients a0{};
    Coefficients r1{};
    Coefficients r2{};
    Coefficients omega{};
    Coefficients sigma{};

    /// Always expressed as a B-spline (exact quadratics included).
    BSplineParams truth(const InitialConditions& x) const;

    /// "bspline": moderate knot effect. "two_regime": near-plateau then collapse.
    /// "quadratic": exact quadratics.
    static TruthGenerator preset(std::string_view name);
    static std::vector<std::string> preset_names();
};

struct RunTruth {
    int run_id = 0;
    BSplineParams params;
    /// First observed time with Y <= 0, or the horizon if censored.
    double end_year = 0.0;
    bool censored = false;
    bool dropped = false;
    std::size_t observations = 0;
};

struct SyntheticTruth {
    std::string generator;
    bool quadratic = false;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<RunTruth> runs;

    const RunTruth& at(int run_id) const;
};

struct SyntheticData {
    std::vector<FoSSeries> series;  ///< runs that kept at least the minimum observations
    SyntheticTruth truth;           ///< every design run, dropped ones flagged
};

inline constexpr double kDefaultHorizon = 184.0;

/// Yearly observations Y_t = g(t) + sigma eps_t for t = 0, 1, ..., truncated at the first
/// t with Y_t <= 0 (kept) or at the horizon. Noise is a fixed function of (seed, run id, t).
SyntheticData synth_generate(const Design& design, const TruthGenerator& generator, double horizon,
                             std::uint64_t seed);

/// Single-run form used by the generator.
FoSSeries simulate_series(int run_id, const BSplineParams& truth, double horizon, std::uint64_t seed);

}  // namespace fosemu
