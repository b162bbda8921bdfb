#include "fosemu/diagnostics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fosemu/error.hpp"
#include "fosemu/stats.hpp"

namespace fosemu {

namespace {

void require_rectangular(const ChainColumns& chains) {
    if (chains.empty() || chains.front().empty()) throw InvalidParameter("diagnostics need at least one draw");
    for (const auto& c : chains)
        if (c.size() != chains.front().size()) throw InvalidParameter("chains have different lengths");
}

ChainColumns split_halves(const ChainColumns& chains) {
    const std::size_t half = chains.front().size() / 2;
    const std::size_t n = chains.front().size();
    ChainColumns out;
    for (const auto& c : chains) {
        // With an odd count the middle draw is dropped.
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(n - half), c.end());
    }
    return out;
}

// Replaces every draw by the normal score of its pooled rank (ties share the average rank).
ChainColumns rank_normalize(const ChainColumns& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    const std::size_t total = m * n;
    std::vector<std::pair<double, std::size_t>> pooled;
    pooled.reserve(total);
    for (std::size_t c = 0; c < m; ++c)
        for (std::size_t i = 0; i < n; ++i) pooled.emplace_back(chains[c][i], c * n + i);
    std::sort(pooled.begin(), pooled.end());

    ChainColumns out(m, std::vector<double>(n));
    const double denom = static_cast<double>(total) + 0.25;
    for (std::size_t lo = 0; lo < total;) {
        std::size_t hi = lo;
        while (hi + 1 < total && pooled[hi + 1].first == pooled[lo].first) ++hi;
        const double rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
        const double z = stats::normal_quantile((rank - 0.375) / denom);
        for (std::size_t k = lo; k <= hi; ++k) {
            const std::size_t idx = pooled[k].second;
            out[idx / n][idx % n] = z;
        }
        lo = hi + 1;
    }
    return out;
}

double plain_rhat(const ChainColumns& chains) {
    const std::size_t m = chains.size();
    const double n = static_cast<double>(chains.front().size());
    std::vector<double> means(m), vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = stats::mean(chains[c]);
        vars[c] = stats::variance(chains[c]);
    }
    const double w = stats::mean(vars);
    const double b = n * stats::variance(means);
    if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

bool all_equal(const ChainColumns& chains) {
    const double first = chains.front().front();
    for (const auto& c : chains)
        for (double v : c)
            if (v != first) return false;
    return true;
}

// Autocovariances at increasing lags, computed only as far as the estimator asks.
class LazyAutocovariance {
public:
    explicit LazyAutocovariance(const std::vector<double>& x) : x_(x), mean_(stats::mean(x)) {}

    double at(std::size_t lag) {
        while (cache_.size() <= lag) {
            const std::size_t k = cache_.size();
            double s = 0.0;
            for (std::size_t i = 0; i + k < x_.size(); ++i) s += (x_[i] - mean_) * (x_[i + k] - mean_);
            cache_.push_back(s / static_cast<double>(x_.size()));
        }
        return cache_[lag];
    }
    double mean() const { return mean_; }

private:
    const std::vector<double>& x_;
    double mean_;
    std::vector<double> cache_;
};

double geyer_ess(const ChainColumns& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    const double total = static_cast<double>(m * n);
    if (n < 4) return total;

    std::vector<LazyAutocovariance> acov;
    acov.reserve(m);
    for (const auto& c : chains) acov.emplace_back(c);

    std::vector<double> chain_mean(m), chain_var(m);
    for (std::size_t c = 0; c < m; ++c) {
        chain_mean[c] = acov[c].mean();
        chain_var[c] = acov[c].at(0) * static_cast<double>(n) / static_cast<double>(n - 1);
    }
    const double mean_var = stats::mean(chain_var);
    double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
    if (m > 1) var_plus += stats::variance(chain_mean);
    if (!(var_plus > 0.0)) return total;

    auto rho_at = [&](std::size_t lag) {
        double s = 0.0;
        for (auto& a : acov) s += a.at(lag);
        return 1.0 - (mean_var - s / static_cast<double>(m)) / var_plus;
    };

    std::vector<double> rho(n, 0.0);
    double even = 1.0;
    double odd = rho_at(1);
    rho[0] = even;
    rho[1] = odd;
    std::size_t s = 1;
    while (s < n - 4 && even + odd > 0.0) {
        even = rho_at(s + 1);
        odd = rho_at(s + 2);
        if (even + odd >= 0.0) {
            rho[s + 1] = even;
            rho[s + 2] = odd;
        }
        s += 2;
    }
    const std::size_t max_s = s;
    if (even > 0.0) rho[max_s + 1] = even;

    for (std::size_t k = 1; k + 3 <= max_s; k += 2) {
        if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
            rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
            rho[k + 2] = rho[k + 1];
        }
    }
    const double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(max_s), 0.0) +
                       rho[max_s + 1];
    return total / std::max(tau, 1.0 / std::log10(total));
}

}  // namespace

double split_rhat(const ChainColumns& chains) {
    require_rectangular(chains);
    if (chains.front().size() < 4) throw InvalidParameter("split R-hat needs at least 4 draws per chain");
    if (all_equal(chains)) return 1.0;
    const ChainColumns split = split_halves(chains);
    const double bulk = plain_rhat(rank_normalize(split));

    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    const double median = stats::quantile(pooled, 0.5);
    ChainColumns folded = split;
    for (auto& c : folded)
        for (double& v : c) v = std::abs(v - median);
    const double tail = all_equal(folded) ? 1.0 : plain_rhat(rank_normalize(folded));
    return std::max(bulk, tail);
}

double ess_bulk(const ChainColumns& chains) {
    require_rectangular(chains);
    const double total = static_cast<double>(chains.size() * chains.front().size());
    if (all_equal(chains)) return total;
    const ChainColumns split = chains.front().size() >= 4 ? split_halves(chains) : chains;
    return geyer_ess(rank_normalize(split));
}

bool chains_disjoint(const ChainColumns& chains, double q_lo, double q_hi) {
    require_rectangular(chains);
    std::vector<std::pair<double, double>> intervals;
    for (const auto& c : chains) intervals.emplace_back(stats::quantile(c, q_lo), stats::quantile(c, q_hi));
    for (std::size_t a = 0; a < intervals.size(); ++a)
        for (std::size_t b = a + 1; b < intervals.size(); ++b)
            if (intervals[a].second < intervals[b].first || intervals[b].second < intervals[a].first) return true;
    return false;
}

int DiagnosticsReport::divergences() const {
    int total = 0;
    for (const auto& s : chain_stats) total += s.divergences;
    return total;
}

std::optional<double> DiagnosticsReport::max_rhat() const {
    std::optional<double> best;
    for (const auto& p : parameters)
        if (p.rhat && (!best || *p.rhat > *best)) best = p.rhat;
    return best;
}

std::vector<std::string> DiagnosticsReport::flagged() const {
    std::vector<std::string> out;
    for (const auto& p : parameters)
        if (p.rhat_flag) out.push_back(p.name);
    return out;
}

std::vector<std::string> DiagnosticsReport::multimodal() const {
    std::vector<std::string> out;
    for (const auto& p : parameters)
        if (p.multimodal) out.push_back(p.name);
    return out;
}

const ParameterSummary* DiagnosticsReport::find(std::string_view name) const {
    for (const auto& p : parameters)
        if (p.name == name) return &p;
    return nullptr;
}

DiagnosticsReport diagnose(const PosteriorDraws& draws, std::span<const ChainStats> chain_stats) {
    if (draws.chains < 1 || draws.per_chain < 1) throw InvalidParameter("no posterior draws to diagnose");
    DiagnosticsReport report;
    report.chains = draws.chains;
    report.per_chain = draws.per_chain;
    report.chain_stats.assign(chain_stats.begin(), chain_stats.end());
    const bool multi = draws.chains >= 2 && draws.per_chain >= 4;
    for (std::size_t p = 0; p < draws.parameters(); ++p) {
        ParameterSummary s;
        s.name = draws.names[p];
        const ChainColumns by_chain = draws.column_by_chain(p);
        std::vector<double> all = draws.column(p);
        s.mean = stats::mean(all);
        s.sd = all.size() > 1 ? std::sqrt(stats::variance(all)) : 0.0;
        std::sort(all.begin(), all.end());
        s.q025 = stats::quantile_sorted(all, 0.025);
        s.q50 = stats::quantile_sorted(all, 0.5);
        s.q975 = stats::quantile_sorted(all, 0.975);
        s.ess = ess_bulk(by_chain);
        if (multi) {
            s.rhat = split_rhat(by_chain);
            s.rhat_flag = *s.rhat > kRhatThreshold;
            s.multimodal = chains_disjoint(by_chain);
        }
        report.parameters.push_back(std::move(s));
    }
    return report;
}

}  // namespace fosemu
