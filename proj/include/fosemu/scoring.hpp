#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fosemu {

struct MseResult {
    std::vector<double> squared_errors;
    double mean = 0.0;
};

/// Per-time squared errors of predicted means against observations.
MseResult mse(std::span<const double> predicted_mean, std::span<const double> observed);

/// CRPS of the empirical distribution of `samples` at observation x, via the sorted form.
double crps_empirical(std::span<const double> samples, double x);
/// Same, for samples already sorted ascending.
double crps_sorted(std::span<const double> sorted_samples, double x);

/// Closed-form CRPS of N(mu, sigma^2) at x.
double crps_gaussian(double mu, double sigma, double x);

/// Scores of one model on one run, per observation time.
struct RunScores {
    int run_id = 0;
    std::vector<double> years;
    std::vector<double> squared_error;
    std::vector<double> crps;
};

/// `samples` holds predictive draws (draws x times) aligned with `observed`.
RunScores score_run(int run_id, std::span<const double> years, std::span<const double> observed,
                    const Eigen::MatrixXd& samples);

/// Tukey boxplot: quartiles, whiskers at the most extreme points within 1.5 IQR.
struct BoxplotSummary {
    double lower_whisker = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double upper_whisker = 0.0;
    std::vector<double> outliers;
};

BoxplotSummary boxplot(std::span<const double> values);

struct RunComparison {
    int run_id = 0;
    std::vector<double> years;
    std::vector<double> delta_mse;   ///< first model minus second, per time
    std::vector<double> delta_crps;
    BoxplotSummary mse_box;
    BoxplotSummary crps_box;
};

/// Paired differences between two models scored on the same runs and times
/// (conventionally quadratic minus B-spline).
struct ScoreTable {
    std::vector<RunScores> first;
    std::vector<RunScores> second;
    std::vector<RunComparison> runs;

    /// Median across runs of each run's median CRPS difference.
    double median_delta_crps() const;
    double median_delta_mse() const;
};

/// Throws InvalidParameter when runs or times do not match.
ScoreTable compare_models(std::vector<RunScores> first, std::vector<RunScores> second);

/// Median across runs of each run's median CRPS.
double median_run_crps(std::span<const RunScores> scores);

}  // namespace fosemu
