#pragma once

// Acquisition strategies over a posterior on the joint (context, action) grid.
// ae-borda picks the context with the widest optimistic-vs-pessimistic value
// gap and acts optimistically; ucb-borda draws contexts uniformly but keeps
// the optimistic action rule; uniform-borda draws everything uniformly. The
// final policy maximizes the tightest lower confidence bound seen during the
// run. Because the posterior factor grows row by row, the state at any past
// observation count is recoverable from prefixes, and the lower-bound archive
// covers every step without storing snapshots.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "borda/environment.hpp"
#include "borda/errors.hpp"
#include "borda/grids.hpp"
#include "borda/posterior.hpp"
#include "borda/random.hpp"

namespace borda {

enum class StrategyKind { kAeBorda, kUcbBorda, kUniformBorda };

inline std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::kAeBorda: return "ae-borda";
        case StrategyKind::kUcbBorda: return "ucb-borda";
        case StrategyKind::kUniformBorda: return "uniform-borda";
    }
    return "?";
}

inline StrategyKind strategy_from_string(const std::string& name) {
    if (name == "ae-borda") return StrategyKind::kAeBorda;
    if (name == "ucb-borda") return StrategyKind::kUcbBorda;
    if (name == "uniform-borda") return StrategyKind::kUniformBorda;
    throw ConfigError("unknown strategy: " + name);
}

struct BetaSchedule {
    enum class Mode { kTheoretical, kFixed };

    Mode mode = Mode::kFixed;
    double rkhs_bound = 1.0;  // B of the norm assumption (theoretical mode)
    double delta = 0.05;
    double fixed_value = 2.0;

    void validate() const {
        if (mode == Mode::kTheoretical) {
            if (!(rkhs_bound > 0.0)) throw ConfigError("BetaSchedule: B must be positive");
            if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("BetaSchedule: delta must lie in (0,1)");
        } else if (!(fixed_value >= 0.0)) {
            throw ConfigError("BetaSchedule: fixed beta must be non-negative");
        }
    }

    [[nodiscard]] double value(double phi_hat) const {
        if (mode == Mode::kFixed) return fixed_value;
        return 2.0 * rkhs_bound + std::sqrt(2.0 * phi_hat + 1.0 + std::log(2.0 / delta));
    }
};

/// Uniformly random warmup triples (x, a, a') over the unit cubes, labeled by
/// Bernoulli duels.
inline std::vector<PreferenceObservation> warmup(const Environment& env, int n0, Rng& rng) {
    if (n0 < 0) throw ConfigError("warmup: n0 must be non-negative");
    std::vector<PreferenceObservation> data;
    data.reserve(static_cast<std::size_t>(n0));
    for (int i = 0; i < n0; ++i) {
        PreferenceObservation obs;
        obs.context.resize(env.context_dim);
        obs.action.resize(env.action_dim);
        obs.comparator.resize(env.action_dim);
        for (int d = 0; d < env.context_dim; ++d) obs.context[d] = rng.uniform();
        for (int d = 0; d < env.action_dim; ++d) obs.action[d] = rng.uniform();
        for (int d = 0; d < env.action_dim; ++d) obs.comparator[d] = rng.uniform();
        obs.outcome = duel(env, obs.context, obs.action, obs.comparator, rng);
        data.push_back(std::move(obs));
    }
    return data;
}

struct StrategyOptions {
    int info_grid_points = 256;  // probe grid for the greedy information-gain estimate
    long capacity_hint = 0;      // expected total observation count (avoids regrowth)
};

class StrategyState {
public:
    StrategyState(StrategyKind kind, const KernelSpec& kernel, double lambda, double eta,
                  BetaSchedule beta, Eigen::MatrixXd context_grid, Eigen::MatrixXd action_grid,
                  const std::vector<PreferenceObservation>& warmup_data, StrategyOptions options = {})
        : kind_(kind),
          beta_(beta),
          contexts_(std::move(context_grid)),
          actions_(std::move(action_grid)) {
        beta_.validate();
        if (contexts_.rows() == 0 || actions_.rows() == 0)
            throw ConfigError("StrategyState: evaluation grids must be non-empty");
        const int input_dim = static_cast<int>(contexts_.cols() + actions_.cols());
        posterior_ = PosteriorModel::fit(kernel, lambda, warmup_data, eta, input_dim);
        warmup_count_ = posterior_.size();
        joint_ = joint_grid(contexts_, actions_);
        prior_variance_.resize(joint_.rows());
        for (long p = 0; p < joint_.rows(); ++p)
            prior_variance_[p] = kernel_prior_variance(kernel, joint_.row(p).transpose());
        if (options.capacity_hint > 0) reserve(options.capacity_hint);
        if (beta_.mode == BetaSchedule::Mode::kTheoretical)
            tracker_.emplace(kernel, eta, halton_points(options.info_grid_points, input_dim));
        rebuild_cache();
        if (tracker_) tracker_->advance(static_cast<int>(warmup_count_));
        beta_history_.push_back(beta_.value(tracker_ ? tracker_->phi() : 0.0));
    }

    /// Widest-value-gap context rule for ae-borda; a uniform grid draw otherwise.
    [[nodiscard]] long select_context(Rng& rng) const {
        if (kind_ != StrategyKind::kAeBorda)
            return static_cast<long>(rng.uniform_index(static_cast<std::size_t>(contexts_.rows())));
        long best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (long ci = 0; ci < contexts_.rows(); ++ci) {
            const double value = acquisition_value(ci);
            if (value > best_value) {
                best_value = value;
                best = ci;
            }
        }
        return best;
    }

    /// Optimistic action (ae/ucb) or uniform draw; the comparator is always a
    /// uniform draw from the action grid.
    [[nodiscard]] std::pair<long, long> select_action(long context_index, Rng& rng) const {
        long action;
        if (kind_ == StrategyKind::kUniformBorda) {
            action = static_cast<long>(rng.uniform_index(static_cast<std::size_t>(actions_.rows())));
        } else {
            const double beta = beta_current();
            long best = 0;
            double best_value = -std::numeric_limits<double>::infinity();
            for (long ai = 0; ai < actions_.rows(); ++ai) {
                const double value = mean_at(context_index, ai) + beta * stddev_at(context_index, ai);
                if (value > best_value) {
                    best_value = value;
                    best = ai;
                }
            }
            action = best;
        }
        const long comparator =
            static_cast<long>(rng.uniform_index(static_cast<std::size_t>(actions_.rows())));
        return {action, comparator};
    }

    /// One loop iteration: select, duel, absorb, archive.
    PreferenceObservation step(const Environment& env, Rng& rng) {
        const long ci = select_context(rng);
        last_acquisition_ = acquisition_value(ci);
        const auto [ai, a2i] = select_action(ci, rng);
        PreferenceObservation obs;
        obs.context = contexts_.row(ci).transpose();
        obs.action = actions_.row(ai).transpose();
        obs.comparator = actions_.row(a2i).transpose();
        obs.outcome = duel(env, obs.context, obs.action, obs.comparator, rng);

        const auto detail = posterior_.absorb(obs);
        if (detail.refactorized) {
            rebuild_cache();
        } else {
            extend_cache(obs.joint(), detail);
        }
        if (tracker_) tracker_->advance(1);
        beta_history_.push_back(beta_.value(tracker_ ? tracker_->phi() : 0.0));
        return obs;
    }

    /// Pessimistic policy: per (x, a), the running max over every archived
    /// observation count of mu_m - beta_m sigma_m, then argmax over actions.
    [[nodiscard]] GridPolicy extract_policy() const {
        return extract_policies_at({posterior_.size()}).front();
    }

    /// Policies at several observation counts in one trajectory pass. Counts
    /// must be non-decreasing and lie within [warmup_count, current count].
    [[nodiscard]] std::vector<GridPolicy> extract_policies_at(
        const std::vector<long>& counts) const {
        if (counts.empty()) throw ConfigError("extract_policies_at: need at least one count");
        if (beta_history_.empty()) throw ConfigError("extract_policies_at: empty archive");
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] < warmup_count_ || counts[k] > posterior_.size())
                throw ConfigError("extract_policies_at: count outside archived range");
            if (k > 0 && counts[k] < counts[k - 1])
                throw ConfigError("extract_policies_at: counts must be non-decreasing");
        }
        const long num_contexts = contexts_.rows();
        const long num_actions = actions_.rows();
        const long total = posterior_.size();
        const auto u = posterior_.whitened_targets();

        std::vector<GridPolicy> policies(counts.size());
        std::vector<double> best_value(counts.size());
        for (auto& policy : policies)
            policy.action_index.assign(static_cast<std::size_t>(num_contexts), 0);

        for (long ci = 0; ci < num_contexts; ++ci) {
            for (std::size_t k = 0; k < counts.size(); ++k)
                best_value[k] = -std::numeric_limits<double>::infinity();
            for (long ai = 0; ai < num_actions; ++ai) {
                const long p = ci * num_actions + ai;
                double mean = 0.0, sumsq = 0.0;
                double running = -std::numeric_limits<double>::infinity();
                std::size_t next = 0;
                for (long m = 0; m <= total && next < counts.size(); ++m) {
                    if (m >= warmup_count_) {
                        const double sigma =
                            std::sqrt(std::max(prior_variance_[p] - sumsq, 0.0));
                        const double lcb =
                            mean - beta_history_[static_cast<std::size_t>(m - warmup_count_)] * sigma;
                        if (lcb > running) running = lcb;
                        while (next < counts.size() && counts[next] == m) {
                            if (running > best_value[next]) {
                                best_value[next] = running;
                                policies[next].action_index[static_cast<std::size_t>(ci)] = ai;
                            }
                            ++next;
                        }
                    }
                    if (m < total) {
                        const double coord = coeffs_(m, p);
                        mean += coord * u[m];
                        sumsq += coord * coord;
                    }
                }
            }
        }
        return policies;
    }

    [[nodiscard]] StrategyKind kind() const { return kind_; }
    [[nodiscard]] const PosteriorModel& posterior() const { return posterior_; }
    [[nodiscard]] const Eigen::MatrixXd& context_grid() const { return contexts_; }
    [[nodiscard]] const Eigen::MatrixXd& action_grid() const { return actions_; }
    [[nodiscard]] long warmup_count() const { return warmup_count_; }
    [[nodiscard]] long observation_count() const { return posterior_.size(); }
    [[nodiscard]] double beta_current() const { return beta_history_.back(); }
    [[nodiscard]] double phi_current() const { return tracker_ ? tracker_->phi() : 0.0; }
    [[nodiscard]] const std::vector<double>& beta_history() const { return beta_history_; }
    [[nodiscard]] double last_acquisition() const { return last_acquisition_; }

    [[nodiscard]] double mean_at(long context_index, long action_index) const {
        return mean_[context_index * actions_.rows() + action_index];
    }
    [[nodiscard]] double stddev_at(long context_index, long action_index) const {
        const long p = context_index * actions_.rows() + action_index;
        return std::sqrt(std::max(prior_variance_[p] - sumsq_[p], 0.0));
    }

    /// Acquisition value at one context with the current beta: the gap between
    /// the optimistic and pessimistic value maxima over the action grid.
    [[nodiscard]] double acquisition_value(long context_index) const {
        const double beta = beta_current();
        double max_ucb = -std::numeric_limits<double>::infinity();
        double max_lcb = -std::numeric_limits<double>::infinity();
        for (long ai = 0; ai < actions_.rows(); ++ai) {
            const double mean = mean_at(context_index, ai);
            const double spread = beta * stddev_at(context_index, ai);
            max_ucb = std::max(max_ucb, mean + spread);
            max_lcb = std::max(max_lcb, mean - spread);
        }
        return max_ucb - max_lcb;
    }

    [[nodiscard]] double max_acquisition() const {
        double best = -std::numeric_limits<double>::infinity();
        for (long ci = 0; ci < contexts_.rows(); ++ci) best = std::max(best, acquisition_value(ci));
        return best;
    }

private:
    void reserve(long n) {
        if (coeffs_.rows() >= n) return;
        long cap = coeffs_.rows() > 0 ? coeffs_.rows() : 64;
        while (cap < n) cap *= 2;
        Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(cap, joint_.rows());
        if (cache_rows_ > 0) coeffs.topRows(cache_rows_) = coeffs_.topRows(cache_rows_);
        coeffs_ = std::move(coeffs);
    }

    void rebuild_cache() {
        const long n = posterior_.size();
        cache_rows_ = 0;
        reserve(std::max(n, 1L));
        mean_ = Eigen::VectorXd::Zero(joint_.rows());
        sumsq_ = Eigen::VectorXd::Zero(joint_.rows());
        if (n == 0) return;
        Eigen::MatrixXd cross = cross_gram(posterior_.kernel(),
                                           Eigen::MatrixXd(posterior_.design_points()), joint_);
        posterior_.chol_factor().triangularView<Eigen::Lower>().solveInPlace(cross);
        coeffs_.topRows(n) = cross;
        mean_ = cross.transpose() * Eigen::VectorXd(posterior_.whitened_targets());
        sumsq_ = cross.cwiseAbs2().colwise().sum().transpose();
        cache_rows_ = n;
    }

    void extend_cache(const Eigen::VectorXd& point, const PosteriorModel::ExtensionDetail& detail) {
        const long m = posterior_.size() - 1;  // index of the new factor row
        reserve(m + 1);
        Eigen::MatrixXd single(1, joint_.cols());
        single.row(0) = point.transpose();
        Eigen::RowVectorXd row = cross_gram(posterior_.kernel(), single, joint_).row(0);
        if (m > 0) row.noalias() -= detail.chol_row.transpose() * coeffs_.topRows(m);
        row /= detail.diag;
        coeffs_.row(m) = row;
        mean_ += row.transpose() * detail.whitened_target;
        sumsq_ += row.transpose().cwiseAbs2();
        cache_rows_ = m + 1;
    }

    StrategyKind kind_;
    BetaSchedule beta_;
    PosteriorModel posterior_;
    Eigen::MatrixXd contexts_;
    Eigen::MatrixXd actions_;
    Eigen::MatrixXd joint_;
    Eigen::VectorXd prior_variance_;
    Eigen::MatrixXd coeffs_;  // row m = forward-solve coordinate of observation m+1 at each probe
    Eigen::VectorXd mean_;
    Eigen::VectorXd sumsq_;
    std::optional<InfoGainTracker> tracker_;
    std::vector<double> beta_history_;
    long warmup_count_ = 0;
    long cache_rows_ = 0;
    double last_acquisition_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace borda
