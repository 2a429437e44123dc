#pragma once

// Ground-truth preference environment: link functions, Bernoulli duels,
// the contextual Borda oracle, and policy suboptimality on evaluation grids.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "borda/errors.hpp"
#include "borda/grids.hpp"
#include "borda/random.hpp"
#include "borda/rff.hpp"

namespace borda {

enum class LinkFamily { kLogistic, kGaussianCdf };

inline std::string to_string(LinkFamily family) {
    return family == LinkFamily::kLogistic ? "logistic" : "gaussian-cdf";
}

inline LinkFamily link_family_from_string(const std::string& name) {
    if (name == "logistic") return LinkFamily::kLogistic;
    if (name == "gaussian-cdf" || name == "probit") return LinkFamily::kGaussianCdf;
    throw ConfigError("unknown link family: " + name);
}

/// Monotone map from reward differences to win probabilities.
/// rho(0) = 1/2 and rho(u) + rho(-u) = 1 for both families.
struct LinkFunction {
    LinkFamily family = LinkFamily::kLogistic;
    double scale = 1.0;

    void validate() const {
        if (!(scale > 0.0)) throw ConfigError("link scale must be positive");
    }

    [[nodiscard]] double operator()(double u) const {
        const double v = u / scale;
        if (family == LinkFamily::kLogistic) {
            // Branch on the sign to avoid overflow in exp.
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        }
        return 0.5 * std::erfc(-v / std::numbers::sqrt2);
    }
};

struct Environment {
    RffBasis reward;
    LinkFunction link;
    int context_dim = 0;
    int action_dim = 0;

    void validate() const {
        reward.validate();
        link.validate();
        if (reward.context_dim != context_dim || reward.action_dim != action_dim)
            throw ConfigError("Environment: reward basis dims do not match environment dims");
    }

    [[nodiscard]] double reward_value(const Eigen::VectorXd& context,
                                      const Eigen::VectorXd& action) const {
        return eval_reward(reward, context, action);
    }

    /// f(x, a, a') = rho(r(x,a) - r(x,a')).
    [[nodiscard]] double preference_probability(const Eigen::VectorXd& context,
                                                const Eigen::VectorXd& action,
                                                const Eigen::VectorXd& comparator) const {
        return link(reward_value(context, action) - reward_value(context, comparator));
    }
};

/// One Bernoulli comparison: 1 if `action` wins against `comparator`.
inline int duel(const Environment& env, const Eigen::VectorXd& context,
                const Eigen::VectorXd& action, const Eigen::VectorXd& comparator, Rng& rng) {
    return rng.bernoulli(env.preference_probability(context, action, comparator));
}

/// Deterministic quadrature nodes used by the Borda oracle: Halton points
/// over the action cube.
inline Eigen::MatrixXd borda_quadrature_nodes(int action_dim, int quadrature_points) {
    if (quadrature_points < 2) throw ConfigError("borda_oracle: need at least 2 quadrature points");
    return halton_points(quadrature_points, action_dim);
}

/// Contextual Borda value f_r(x, a) = E_{a' ~ U(A)}[ f(x, a, a') ], computed by
/// quasi-random quadrature over the action cube.
inline double borda_oracle(const Environment& env, const Eigen::VectorXd& context,
                           const Eigen::VectorXd& action, int quadrature_points) {
    const Eigen::MatrixXd nodes = borda_quadrature_nodes(env.action_dim, quadrature_points);
    const double own = env.reward_value(context, action);
    Eigen::MatrixXd ctx(1, env.context_dim);
    if (env.context_dim > 0) ctx.row(0) = context.transpose();
    const Eigen::MatrixXd node_rewards = eval_reward_cross(env.reward, ctx, nodes);  // 1 x Q
    double acc = 0.0;
    for (long q = 0; q < node_rewards.cols(); ++q) acc += env.link(own - node_rewards(0, q));
    return acc / static_cast<double>(node_rewards.cols());
}

/// Borda values over a full (contexts x actions) grid; one quadrature node set
/// shared across all cells. Equivalent to calling borda_oracle per cell.
inline Eigen::MatrixXd borda_oracle_grid(const Environment& env, const Eigen::MatrixXd& contexts,
                                         const Eigen::MatrixXd& actions, int quadrature_points) {
    const Eigen::MatrixXd nodes = borda_quadrature_nodes(env.action_dim, quadrature_points);
    const Eigen::MatrixXd grid_rewards = eval_reward_cross(env.reward, contexts, actions);
    const Eigen::MatrixXd node_rewards = eval_reward_cross(env.reward, contexts, nodes);
    Eigen::MatrixXd values(contexts.rows(), actions.rows());
    const double inv_q = 1.0 / static_cast<double>(quadrature_points);
    for (long i = 0; i < contexts.rows(); ++i)
        for (long j = 0; j < actions.rows(); ++j) {
            double acc = 0.0;
            for (long q = 0; q < nodes.rows(); ++q)
                acc += env.link(grid_rewards(i, j) - node_rewards(i, q));
            values(i, j) = acc * inv_q;
        }
    return values;
}

/// A policy on evaluation grids: one action-grid index per context-grid row.
struct GridPolicy {
    std::vector<long> action_index;
};

struct SuboptimalityReport {
    double max = 0.0;     // sup over contexts of the per-context reward gap
    double median = 0.0;  // median over contexts of the same gap
};

/// Per context x: gap(x) = max_a r(x,a) - r(x, pi(x)) over the action grid.
inline SuboptimalityReport suboptimality(const Environment& env, const GridPolicy& policy,
                                         const Eigen::MatrixXd& contexts,
                                         const Eigen::MatrixXd& actions) {
    if (contexts.rows() == 0 || actions.rows() == 0)
        throw ConfigError("suboptimality: empty evaluation grid");
    if (policy.action_index.size() != static_cast<std::size_t>(contexts.rows()))
        throw ConfigError("suboptimality: policy size does not match context grid");
    const Eigen::MatrixXd rewards = eval_reward_cross(env.reward, contexts, actions);
    std::vector<double> gaps(static_cast<std::size_t>(contexts.rows()));
    for (long i = 0; i < contexts.rows(); ++i) {
        const long chosen = policy.action_index[static_cast<std::size_t>(i)];
        if (chosen < 0 || chosen >= actions.rows())
            throw ConfigError("suboptimality: policy action index out of range");
        gaps[static_cast<std::size_t>(i)] = rewards.row(i).maxCoeff() - rewards(i, chosen);
    }
    SuboptimalityReport report;
    report.max = *std::max_element(gaps.begin(), gaps.end());
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    report.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return report;
}

}  // namespace borda
