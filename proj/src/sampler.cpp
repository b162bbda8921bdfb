#include "fosemu/sampler.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "chains.hpp"
#include "fosemu/error.hpp"

namespace fosemu {

std::string_view to_string(SamplerKind kind) {
    return kind == SamplerKind::nuts ? "nuts" : "mwg";
}

SamplerKind parse_sampler_kind(std::string_view text) {
    if (text == "nuts") return SamplerKind::nuts;
    if (text == "mwg" || text == "metropolis") return SamplerKind::metropolis_within_gibbs;
    throw InvalidParameter(fmt::format("unknown sampler '{}': expected nuts or mwg", text));
}

void ChainConfig::validate() const {
    std::vector<std::string> problems;
    if (chains < 1) problems.push_back(fmt::format("chains must be >= 1 (got {})", chains));
    if (warmup < 0) problems.push_back(fmt::format("warmup must be >= 0 (got {})", warmup));
    if (iterations <= warmup)
        problems.push_back(fmt::format("iterations ({}) must exceed warmup ({})", iterations, warmup));
    if (!(target_accept > 0.0 && target_accept < 1.0))
        problems.push_back(fmt::format("target acceptance must lie in (0, 1) (got {})", target_accept));
    if (max_tree_depth < 1) problems.push_back("max tree depth must be >= 1");
    if (!(init_jitter >= 0.0)) problems.push_back("initial jitter must be >= 0");
    if (init_retries < 1) problems.push_back("initialization retries must be >= 1");
    if (threads < 0) problems.push_back("threads must be >= 0");
    if (!problems.empty()) {
        std::string msg = "invalid chain configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw InvalidParameter(msg);
    }
}

std::optional<std::size_t> PosteriorDraws::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

std::size_t PosteriorDraws::require_index(std::string_view name) const {
    if (auto i = index_of(name)) return *i;
    throw InvalidParameter(fmt::format("parameter '{}' not present in the posterior draws", name));
}

std::vector<double> PosteriorDraws::column(std::size_t param) const {
    std::vector<double> out;
    out.reserve(total());
    for (int c = 0; c < chains; ++c)
        for (int d = 0; d < per_chain; ++d) out.push_back((*this)(c, d, param));
    return out;
}

std::vector<std::vector<double>> PosteriorDraws::column_by_chain(std::size_t param) const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(chains));
    for (int c = 0; c < chains; ++c) {
        out[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(per_chain));
        for (int d = 0; d < per_chain; ++d) out[static_cast<std::size_t>(c)].push_back((*this)(c, d, param));
    }
    return out;
}

namespace {

std::vector<double> starting_point(const PosteriorModel& model, const std::vector<double>& base,
                                   const ChainConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> jitter(-cfg.init_jitter, cfg.init_jitter);
    for (int attempt = 0; attempt < cfg.init_retries; ++attempt) {
        std::vector<double> q = base;
        for (double& v : q) v += jitter(rng);
        if (std::isfinite(model.log_density(q))) return q;
    }
    if (std::isfinite(model.log_density(base))) return base;
    throw NumericalError(fmt::format("no finite log posterior found at initialization after {} attempts",
                                     cfg.init_retries));
}

}  // namespace

McmcResult run_mcmc(const PosteriorModel& model, const ChainConfig& cfg) {
    cfg.validate();
    const std::vector<double> base = model.pack(model.initial_state());
    const auto n_chains = static_cast<std::size_t>(cfg.chains);
    std::vector<detail::ChainOutput> outputs(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t c = next++; c < n_chains; c = next++) {
            try {
                Rng rng(stream_seed(cfg.seed, c));
                auto init = starting_point(model, base, cfg, rng);
                outputs[c] = cfg.algorithm == SamplerKind::nuts ? detail::run_nuts_chain(model, cfg, std::move(init), rng)
                                                                : detail::run_mwg_chain(model, cfg, std::move(init), rng);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    std::size_t threads = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n_chains);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    McmcResult result;
    result.model = model.model();
    auto& draws = result.draws;
    draws.names = model.parameter_names();
    draws.chains = cfg.chains;
    draws.per_chain = cfg.kept();
    draws.first_iteration = cfg.warmup;
    const std::size_t dim = model.dimension();
    draws.values.reserve(draws.total() * dim);
    for (auto& out : outputs) {
        for (std::size_t d = 0; d < static_cast<std::size_t>(cfg.kept()); ++d) {
            const auto c = model.constrain(std::span<const double>(out.kept).subspan(d * dim, dim));
            draws.values.insert(draws.values.end(), c.begin(), c.end());
        }
        result.chain_stats.push_back(out.stats);
    }
    return result;
}

}  // namespace fosemu
