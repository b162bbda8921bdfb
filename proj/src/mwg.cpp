// Adaptive Metropolis-within-Gibbs: Gaussian random-walk updates of one coordinate at a
// time. Proposals leaving the support (log density -inf) are rejected. During warmup each
// coordinate's log proposal scale follows a Robbins-Monro step toward 44% acceptance.

#include <cmath>

#include "chains.hpp"

namespace fosemu::detail {

ChainOutput run_mwg_chain(const PosteriorModel& model, const ChainConfig& cfg, std::vector<double> init, Rng& rng) {
    constexpr double kTargetAccept = 0.44;
    const std::size_t dim = model.dimension();
    std::vector<double> log_scale(dim, std::log(0.1));
    std::vector<double> q = std::move(init);
    double logp = model.log_density(q);

    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    ChainOutput out;
    out.kept.reserve(static_cast<std::size_t>(cfg.kept()) * dim);
    long long evals = 1;
    double accepted = 0.0;
    for (int it = 0; it < cfg.iterations; ++it) {
        const double gain = std::min(0.5, 1.0 / std::sqrt(1.0 + it));
        double sweep_accepted = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double old = q[j];
            q[j] = old + std::exp(log_scale[j]) * normal(rng);
            const double proposal = model.log_density(q);
            ++evals;
            const bool accept = std::isfinite(proposal) && std::log(uniform(rng)) < proposal - logp;
            if (accept) {
                logp = proposal;
                sweep_accepted += 1.0;
            } else {
                q[j] = old;
            }
            if (it < cfg.warmup) log_scale[j] += gain * ((accept ? 1.0 : 0.0) - kTargetAccept);
        }
        if (it >= cfg.warmup) {
            accepted += sweep_accepted / static_cast<double>(dim);
            out.kept.insert(out.kept.end(), q.begin(), q.end());
        }
    }
    out.stats.mean_accept = cfg.kept() > 0 ? accepted / cfg.kept() : 0.0;
    out.stats.gradient_evaluations = evals;
    return out;
}

}  // namespace fosemu::detail
