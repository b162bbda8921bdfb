#include "fosemu/data.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

#include "fosemu/error.hpp"

namespace fosemu {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
    std::string msg = fmt::format("{} data validation problem(s):", violations.size());
    for (const auto& v : violations) msg += "\n  " + v;
    return msg;
}

}  // namespace

DataValidationError::DataValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate_series(std::span<const FoSSeries> runs, std::size_t min_observations) {
    std::vector<std::string> problems;
    std::set<int> seen;
    for (const auto& r : runs) {
        if (!seen.insert(r.run_id).second) problems.push_back(fmt::format("run {}: duplicate run id", r.run_id));
        if (r.years.size() != r.excess.size()) {
            problems.push_back(fmt::format("run {}: {} times but {} observations", r.run_id, r.years.size(),
                                           r.excess.size()));
            continue;
        }
        if (r.size() < min_observations)
            problems.push_back(fmt::format("run {}: {} measurements, at least {} required", r.run_id, r.size(),
                                           min_observations));
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (!std::isfinite(r.years[j]) || r.years[j] < 0.0 || !std::isfinite(r.excess[j])) {
                problems.push_back(fmt::format("run {}: non-finite or negative entry at index {}", r.run_id, j));
                break;
            }
            if (j > 0 && !(r.years[j] > r.years[j - 1])) {
                problems.push_back(fmt::format("run {}: times not strictly increasing at index {}", r.run_id, j));
                break;
            }
        }
    }
    return problems;
}

}  // namespace fosemu
