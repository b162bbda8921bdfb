#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fosemu/sampler.hpp"

namespace fosemu {

/// Draws of one parameter, one vector per chain (equal lengths).
using ChainColumns = std::vector<std::vector<double>>;

/// Rank-normalized split R-hat: the larger of the bulk and folded versions.
/// Returns 1 when every draw is identical. Requires at least 2 chains or 4 draws per chain.
double split_rhat(const ChainColumns& chains);

/// Bulk effective sample size from rank-normalized split chains, using Geyer's initial
/// monotone sequence estimator. Works with a single chain.
double ess_bulk(const ChainColumns& chains);

/// True when some pair of chains has disjoint central intervals [q_lo, q_hi].
bool chains_disjoint(const ChainColumns& chains, double q_lo = 0.1, double q_hi = 0.9);

inline constexpr double kRhatThreshold = 1.05;

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q50 = 0.0;
    double q975 = 0.0;
    std::optional<double> rhat;  ///< absent for a single chain
    double ess = 0.0;
    bool rhat_flag = false;
    bool multimodal = false;
};

struct DiagnosticsReport {
    int chains = 0;
    int per_chain = 0;
    std::vector<ParameterSummary> parameters;
    std::vector<ChainStats> chain_stats;

    int divergences() const;
    std::optional<double> max_rhat() const;
    /// Names with R-hat above the threshold.
    std::vector<std::string> flagged() const;
    std::vector<std::string> multimodal() const;
    const ParameterSummary* find(std::string_view name) const;
};

DiagnosticsReport diagnose(const PosteriorDraws& draws, std::span<const ChainStats> chain_stats = {});

}  // namespace fosemu
