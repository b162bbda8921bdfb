#include "fosemu/scoring.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fosemu/error.hpp"
#include "fosemu/stats.hpp"

namespace fosemu {

MseResult mse(std::span<const double> predicted_mean, std::span<const double> observed) {
    if (predicted_mean.size() != observed.size())
        throw InvalidParameter(
            fmt::format("{} predictions for {} observations", predicted_mean.size(), observed.size()));
    MseResult r;
    r.squared_errors.reserve(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = predicted_mean[i] - observed[i];
        r.squared_errors.push_back(e * e);
    }
    r.mean = observed.empty() ? 0.0 : stats::mean(r.squared_errors);
    return r;
}

double crps_sorted(std::span<const double> x_sorted, double x) {
    if (x_sorted.empty()) throw InvalidParameter("CRPS needs at least one sample");
    const auto m = static_cast<double>(x_sorted.size());
    // E|X - x| - 0.5 E|X - X'|, where sum_{i,j} |X_i - X_j| = 2 sum_i (2i - M - 1) X_(i).
    double abs_dev = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < x_sorted.size(); ++i) {
        abs_dev += std::abs(x_sorted[i] - x);
        spread += (2.0 * static_cast<double>(i + 1) - m - 1.0) * x_sorted[i];
    }
    return abs_dev / m - spread / (m * m);
}

double crps_empirical(std::span<const double> samples, double x) {
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    return crps_sorted(s, x);
}

double crps_gaussian(double mu, double sigma, double x) {
    if (!(sigma > 0.0)) throw InvalidParameter(fmt::format("CRPS needs a positive sd (got {})", sigma));
    const double z = (x - mu) / sigma;
    return sigma * (z * (2.0 * stats::normal_cdf(z) - 1.0) + 2.0 * stats::normal_pdf(z) - std::numbers::inv_sqrtpi);
}

RunScores score_run(int run_id, std::span<const double> years, std::span<const double> observed,
                    const Eigen::MatrixXd& samples) {
    if (years.size() != observed.size() || static_cast<std::size_t>(samples.cols()) != observed.size())
        throw InvalidParameter(fmt::format("run {}: {} times, {} observations, {} predictive columns", run_id,
                                           years.size(), observed.size(), samples.cols()));
    RunScores r;
    r.run_id = run_id;
    r.years.assign(years.begin(), years.end());
    std::vector<double> col(static_cast<std::size_t>(samples.rows()));
    for (std::size_t j = 0; j < observed.size(); ++j) {
        for (Eigen::Index d = 0; d < samples.rows(); ++d)
            col[static_cast<std::size_t>(d)] = samples(d, static_cast<Eigen::Index>(j));
        const double e = stats::mean(col) - observed[j];
        r.squared_error.push_back(e * e);
        r.crps.push_back(crps_empirical(col, observed[j]));
    }
    return r;
}

BoxplotSummary boxplot(std::span<const double> values) {
    if (values.empty()) throw InvalidParameter("boxplot of an empty set");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    BoxplotSummary b;
    b.q1 = stats::quantile_sorted(v, 0.25);
    b.median = stats::quantile_sorted(v, 0.5);
    b.q3 = stats::quantile_sorted(v, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo = b.q1 - 1.5 * iqr;
    const double hi = b.q3 + 1.5 * iqr;
    b.lower_whisker = b.q1;
    b.upper_whisker = b.q3;
    for (double x : v) {
        if (x < lo || x > hi) {
            b.outliers.push_back(x);
            continue;
        }
        b.lower_whisker = std::min(b.lower_whisker, x);
        b.upper_whisker = std::max(b.upper_whisker, x);
    }
    return b;
}

double ScoreTable::median_delta_crps() const {
    std::vector<double> m;
    for (const auto& r : runs) m.push_back(r.crps_box.median);
    return m.empty() ? 0.0 : stats::quantile(m, 0.5);
}

double ScoreTable::median_delta_mse() const {
    std::vector<double> m;
    for (const auto& r : runs) m.push_back(r.mse_box.median);
    return m.empty() ? 0.0 : stats::quantile(m, 0.5);
}

ScoreTable compare_models(std::vector<RunScores> first, std::vector<RunScores> second) {
    std::vector<std::string> problems;
    if (first.size() != second.size())
        problems.push_back(fmt::format("{} runs scored for the first model, {} for the second", first.size(),
                                       second.size()));
    const std::size_t n = std::min(first.size(), second.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (first[i].run_id != second[i].run_id)
            problems.push_back(fmt::format("position {}: run {} vs run {}", i, first[i].run_id, second[i].run_id));
        else if (first[i].years != second[i].years)
            problems.push_back(fmt::format("run {}: observation times differ", first[i].run_id));
    }
    if (!problems.empty()) {
        std::string msg = "score tables do not align:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw InvalidParameter(msg);
    }

    ScoreTable table;
    for (std::size_t i = 0; i < n; ++i) {
        RunComparison c;
        c.run_id = first[i].run_id;
        c.years = first[i].years;
        for (std::size_t j = 0; j < c.years.size(); ++j) {
            c.delta_mse.push_back(first[i].squared_error[j] - second[i].squared_error[j]);
            c.delta_crps.push_back(first[i].crps[j] - second[i].crps[j]);
        }
        if (!c.years.empty()) {
            c.mse_box = boxplot(c.delta_mse);
            c.crps_box = boxplot(c.delta_crps);
        }
        table.runs.push_back(std::move(c));
    }
    table.first = std::move(first);
    table.second = std::move(second);
    return table;
}

double median_run_crps(std::span<const RunScores> scores) {
    std::vector<double> m;
    for (const auto& r : scores)
        if (!r.crps.empty()) m.push_back(stats::quantile(r.crps, 0.5));
    return m.empty() ? 0.0 : stats::quantile(m, 0.5);
}

}  // namespace fosemu
