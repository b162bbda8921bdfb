#pragma once

// Single-chain samplers shared by run_mcmc. Internal.

#include <vector>

#include "fosemu/random.hpp"
#include "fosemu/sampler.hpp"

namespace fosemu::detail {

struct ChainOutput {
    std::vector<double> kept;  ///< kept draws x dimension, unconstrained
    ChainStats stats;
};

ChainOutput run_nuts_chain(const PosteriorModel& model, const ChainConfig& cfg, std::vector<double> init, Rng& rng);
ChainOutput run_mwg_chain(const PosteriorModel& model, const ChainConfig& cfg, std::vector<double> init, Rng& rng);

}  // namespace fosemu::detail
