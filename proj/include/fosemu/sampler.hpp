#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fosemu/inference.hpp"

namespace fosemu {

enum class SamplerKind {
    nuts,                     ///< No-U-turn Hamiltonian sampler, diagonal metric
    metropolis_within_gibbs,  ///< adaptive random-walk updates, one coordinate at a time
};

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view text);

struct ChainConfig {
    int chains = 4;
    int iterations = 2000;  ///< total per chain, warmup included
    int warmup = 1000;
    std::uint64_t seed = 20240501;
    SamplerKind algorithm = SamplerKind::nuts;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    /// Uniform(-jitter, jitter) perturbation applied to each chain's starting point.
    double init_jitter = 0.1;
    int init_retries = 100;
    /// Worker threads for chains; 0 uses the hardware concurrency.
    int threads = 0;

    /// Throws InvalidParameter listing every problem.
    void validate() const;
    int kept() const { return iterations - warmup; }
};

/// Post-warmup draws on the constrained scale (tau and delta exponentiated).
struct PosteriorDraws {
    std::vector<std::string> names;
    int chains = 0;
    int per_chain = 0;
    /// Iteration number of the first kept draw (equals the warmup length).
    int first_iteration = 0;
    std::vector<double> values;  ///< [chain][draw][parameter]

    std::size_t parameters() const { return names.size(); }
    std::size_t total() const { return static_cast<std::size_t>(chains) * static_cast<std::size_t>(per_chain); }
    double operator()(int chain, int draw, std::size_t param) const {
        return values[(static_cast<std::size_t>(chain) * static_cast<std::size_t>(per_chain) +
                       static_cast<std::size_t>(draw)) * names.size() + param];
    }
    /// Row of all parameters for the flat draw index (chain-major).
    std::span<const double> row(std::size_t flat) const {
        return std::span<const double>(values).subspan(flat * names.size(), names.size());
    }
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::size_t require_index(std::string_view name) const;
    /// All draws of one parameter, chains concatenated.
    std::vector<double> column(std::size_t param) const;
    std::vector<std::vector<double>> column_by_chain(std::size_t param) const;
};

struct ChainStats {
    double step_size = 0.0;
    int divergences = 0;
    double mean_accept = 0.0;
    double mean_tree_depth = 0.0;
    long long gradient_evaluations = 0;
};

struct McmcResult {
    ModelKind model = ModelKind::bspline;
    PosteriorDraws draws;
    std::vector<ChainStats> chain_stats;
};

/// Runs independent chains (in parallel when threads allow). Deterministic given the seed,
/// independent of the thread count. Throws NumericalError when no finite starting point is found.
McmcResult run_mcmc(const PosteriorModel& model, const ChainConfig& cfg);

}  // namespace fosemu
