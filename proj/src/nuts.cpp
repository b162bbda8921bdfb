// Multinomial no-U-turn sampler with a diagonal Euclidean metric.
//
// Trajectories are built by repeated doubling; states are drawn with biased progressive
// sampling across subtrees and multinomial sampling within them, and the generalized
// U-turn criterion is checked on merged subtrees and across each subtree boundary.
// Warmup runs dual-averaging step size adaptation and windowed variance estimation
// (initial buffer 75, doubling windows from 25, terminal buffer 50).

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "chains.hpp"
#include "fosemu/error.hpp"

namespace fosemu::detail {

namespace {

constexpr double kMaxDeltaH = 1000.0;

double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::VectorXd grad;
    double logp = 0.0;
};

class DualAveraging {
public:
    void set_mu(double mu) { mu_ = mu; }
    void restart() {
        counter_ = 0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
    }
    double learn(double accept, double delta) {
        ++counter_;
        accept = std::min(accept, 1.0);
        const double eta = 1.0 / (counter_ + kT0);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta - accept);
        const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
        const double x_eta = std::pow(counter_, -kKappa);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        return std::exp(x);
    }
    double final_step() const { return std::exp(x_bar_); }

private:
    static constexpr double kGamma = 0.05;
    static constexpr double kT0 = 10.0;
    static constexpr double kKappa = 0.75;
    double counter_ = 0.0;
    double s_bar_ = 0.0;
    double x_bar_ = 0.0;
    double mu_ = 0.0;
};

class WindowedVariance {
public:
    WindowedVariance(int num_warmup, std::size_t dim) : num_warmup_(num_warmup), mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))), m2_(mean_) {
        if (num_warmup < 20) {
            enabled_ = false;
            return;
        }
        if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
            init_buffer_ = static_cast<int>(0.15 * num_warmup);
            term_buffer_ = static_cast<int>(0.1 * num_warmup);
            base_window_ = num_warmup - (init_buffer_ + term_buffer_);
        }
        window_size_ = base_window_;
        next_window_ = init_buffer_ + window_size_ - 1;
    }

    /// Adds a warmup sample; returns true when a window closes and `inv_metric` was updated.
    bool learn(Eigen::VectorXd& inv_metric, const Eigen::VectorXd& q) {
        if (!enabled_) return false;
        if (in_window()) add(q);
        if (counter_ == next_window_ && counter_ != num_warmup_) {
            compute_next_window();
            const double n = static_cast<double>(samples_);
            const Eigen::VectorXd var = m2_ / (n - 1.0);
            inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
            samples_ = 0;
            mean_.setZero();
            m2_.setZero();
            ++counter_;
            return true;
        }
        ++counter_;
        return false;
    }

private:
    bool in_window() const {
        return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
    }
    void add(const Eigen::VectorXd& q) {
        ++samples_;
        const Eigen::VectorXd d = q - mean_;
        mean_ += d / static_cast<double>(samples_);
        m2_ += d.cwiseProduct(q - mean_);
    }
    void compute_next_window() {
        if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
        window_size_ *= 2;
        next_window_ = counter_ + window_size_;
        if (next_window_ != num_warmup_ - term_buffer_ - 1) {
            const int boundary = next_window_ + 2 * window_size_;
            if (boundary >= num_warmup_ - term_buffer_) next_window_ = num_warmup_ - term_buffer_ - 1;
        }
    }

    int num_warmup_;
    bool enabled_ = true;
    int init_buffer_ = 75;
    int term_buffer_ = 50;
    int base_window_ = 25;
    int window_size_ = 0;
    int next_window_ = 0;
    int counter_ = 0;
    long samples_ = 0;
    Eigen::VectorXd mean_;
    Eigen::VectorXd m2_;
};

class Nuts {
public:
    Nuts(const PosteriorModel& model, const ChainConfig& cfg, Rng& rng)
        : model_(model), cfg_(cfg), rng_(rng), inv_metric_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(model.dimension()))) {}

    void init(const std::vector<double>& q) {
        z_.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
        z_.p = Eigen::VectorXd::Zero(z_.q.size());
        z_.grad = Eigen::VectorXd::Zero(z_.q.size());
        evaluate(z_);
        if (!std::isfinite(z_.logp)) throw NumericalError("NUTS: log posterior is not finite at the initial point");
    }

    ChainOutput run() {
        ChainOutput out;
        const int warmup = cfg_.warmup;
        const auto dim = static_cast<std::size_t>(z_.q.size());
        out.kept.reserve(static_cast<std::size_t>(cfg_.kept()) * dim);

        init_step_size();
        DualAveraging adapt;
        adapt.set_mu(std::log(10.0 * eps_));
        adapt.restart();
        WindowedVariance metric(warmup, dim);

        double accept_sum = 0.0;
        double depth_sum = 0.0;
        for (int it = 0; it < cfg_.iterations; ++it) {
            const Transition t = transition();
            if (it < warmup) {
                eps_ = adapt.learn(t.accept, cfg_.target_accept);
                if (metric.learn(inv_metric_, z_.q)) {
                    init_step_size();
                    adapt.set_mu(std::log(10.0 * eps_));
                    adapt.restart();
                }
                if (it == warmup - 1) eps_ = adapt.final_step();
            } else {
                accept_sum += t.accept;
                depth_sum += t.depth;
                if (t.divergent) ++out.stats.divergences;
                out.kept.insert(out.kept.end(), z_.q.data(), z_.q.data() + z_.q.size());
            }
        }
        const int kept = cfg_.kept();
        out.stats.step_size = eps_;
        out.stats.mean_accept = kept > 0 ? accept_sum / kept : 0.0;
        out.stats.mean_tree_depth = kept > 0 ? depth_sum / kept : 0.0;
        out.stats.gradient_evaluations = gradient_evaluations_;
        return out;
    }

private:
    struct Transition {
        double accept = 0.0;
        int depth = 0;
        bool divergent = false;
    };

    void evaluate(PhasePoint& z) {
        ++gradient_evaluations_;
        z.logp = model_.log_density_gradient(std::span<const double>(z.q.data(), static_cast<std::size_t>(z.q.size())),
                                             std::span<double>(z.grad.data(), static_cast<std::size_t>(z.grad.size())));
    }

    double hamiltonian(const PhasePoint& z) const {
        const double kinetic = 0.5 * z.p.cwiseProduct(inv_metric_).dot(z.p);
        const double h = -z.logp + kinetic;
        return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
    }

    void sample_momentum(PhasePoint& z) {
        for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p(i) = normal_(rng_) / std::sqrt(inv_metric_(i));
    }

    void leapfrog(PhasePoint& z, double eps) {
        z.p += 0.5 * eps * z.grad;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        evaluate(z);
        if (std::isfinite(z.logp)) z.p += 0.5 * eps * z.grad;
    }

    Eigen::VectorXd sharp(const Eigen::VectorXd& p) const { return inv_metric_.cwiseProduct(p); }

    static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                          const Eigen::VectorXd& rho) {
        return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
    }

    void init_step_size() {
        const PhasePoint saved = z_;
        sample_momentum(z_);
        double h0 = hamiltonian(z_);
        leapfrog(z_, eps_);
        double delta_h = h0 - hamiltonian(z_);
        const int direction = delta_h > std::log(0.8) ? 1 : -1;
        for (int guard = 0; guard < 200; ++guard) {
            z_ = saved;
            sample_momentum(z_);
            h0 = hamiltonian(z_);
            leapfrog(z_, eps_);
            delta_h = h0 - hamiltonian(z_);
            if (direction == 1 && !(delta_h > std::log(0.8))) break;
            if (direction == -1 && !(delta_h < std::log(0.8))) break;
            eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
            if (eps_ > 1e7) throw NumericalError("NUTS: step size diverged during initialization; posterior may be improper");
            if (eps_ == 0.0) throw NumericalError("NUTS: step size collapsed to zero during initialization");
        }
        z_ = saved;
    }

    // Builds a subtree of 2^depth leapfrog steps from z_ in direction `sign`.
    bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                    Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                    int& n_leapfrog, double& log_sum_weight, double& sum_metro_prob, bool& divergent) {
        if (depth == 0) {
            leapfrog(z_, sign * eps_);
            ++n_leapfrog;
            const double h = hamiltonian(z_);
            if (h - h0 > kMaxDeltaH) divergent = true;
            log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
            sum_metro_prob += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
            z_propose = z_;
            p_sharp_beg = sharp(z_.p);
            p_sharp_end = p_sharp_beg;
            rho += z_.p;
            p_beg = z_.p;
            p_end = p_beg;
            return !divergent;
        }

        const auto n = z_.q.size();
        // Initial subtree.
        double log_sum_weight_init = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_init_end(n), p_sharp_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
        const bool valid_init = build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                                           p_init_end, h0, sign, n_leapfrog, log_sum_weight_init, sum_metro_prob,
                                           divergent);
        if (!valid_init) return false;

        // Final subtree.
        PhasePoint z_propose_final = z_;
        double log_sum_weight_final = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_final_beg(n), p_sharp_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
        const bool valid_final = build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                                            p_final_beg, p_end, h0, sign, n_leapfrog, log_sum_weight_final,
                                            sum_metro_prob, divergent);
        if (!valid_final) return false;

        // Multinomial sample from the right subtree.
        const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
        if (log_sum_weight_final > log_sum_weight_subtree) {
            z_propose = z_propose_final;
        } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
            z_propose = z_propose_final;
        }

        const Eigen::VectorXd rho_subtree = rho_init + rho_final;
        rho += rho_subtree;

        bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
        persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
        persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
        return persist;
    }

    Transition transition() {
        sample_momentum(z_);
        PhasePoint z_fwd = z_;
        PhasePoint z_bck = z_;
        PhasePoint z_sample = z_;
        PhasePoint z_propose = z_;

        Eigen::VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = sharp(z_.p);
        Eigen::VectorXd p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
        Eigen::VectorXd p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
        Eigen::VectorXd p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
        Eigen::VectorXd rho = z_.p;

        double log_sum_weight = 0.0;
        const double h0 = hamiltonian(z_);
        int n_leapfrog = 0;
        double sum_metro_prob = 0.0;
        bool divergent = false;
        int depth = 0;

        while (depth < cfg_.max_tree_depth) {
            const auto n = z_.q.size();
            Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(n);
            bool valid_subtree = false;
            double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();

            if (uniform_(rng_) > 0.5) {
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                p_sharp_bck_fwd = p_sharp_fwd_bck;
                z_ = z_fwd;
                valid_subtree = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                           p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob,
                                           divergent);
                z_fwd = z_;
            } else {
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                p_sharp_fwd_bck = p_sharp_bck_fwd;
                z_ = z_bck;
                valid_subtree = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                           p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob,
                                           divergent);
                z_bck = z_;
            }
            if (!valid_subtree) break;
            ++depth;

            if (log_sum_weight_subtree > log_sum_weight) {
                z_sample = z_propose;
            } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            rho = rho_bck + rho_fwd;
            bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
            persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
            persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
            if (!persist) break;
        }

        z_ = z_sample;
        Transition t;
        t.accept = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
        t.depth = depth;
        t.divergent = divergent;
        return t;
    }

    const PosteriorModel& model_;
    const ChainConfig& cfg_;
    Rng& rng_;
    Eigen::VectorXd inv_metric_;
    double eps_ = 1.0;
    PhasePoint z_;
    long long gradient_evaluations_ = 0;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace

ChainOutput run_nuts_chain(const PosteriorModel& model, const ChainConfig& cfg, std::vector<double> init, Rng& rng) {
    Nuts sampler(model, cfg, rng);
    sampler.init(init);
    return sampler.run();
}

}  // namespace fosemu::detail
