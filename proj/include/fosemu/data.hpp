#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fosemu {

/// Runs with fewer yearly measurements are rejected at load time.
inline constexpr std::size_t kMinObservations = 4;

/// One computer run: yearly observations of Y = FoS - 1.
struct FoSSeries {
    int run_id = 0;
    std::vector<double> years;
    std::vector<double> excess;
    /// True when the run never reached failure within the simulated horizon.
    bool censored = false;

    std::size_t size() const { return years.size(); }
    double last_year() const { return years.empty() ? 0.0 : years.back(); }
};

/// Every violation in a series collection (short runs, misaligned vectors, duplicate
/// ids, non-finite or decreasing times). Empty means valid.
std::vector<std::string> validate_series(std::span<const FoSSeries> runs,
                                         std::size_t min_observations = kMinObservations);

}  // namespace fosemu
