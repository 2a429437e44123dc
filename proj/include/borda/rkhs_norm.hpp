#pragma once

// Empirical RKHS norm estimation and the reward-vs-borda norm comparison.
// The norm of f is approximated by solving (K + jitter I) alpha = f(points)
// on uniformly sampled points and evaluating sqrt(alpha^T K alpha).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "borda/environment.hpp"
#include "borda/errors.hpp"
#include "borda/kernels.hpp"
#include "borda/posterior.hpp"
#include "borda/random.hpp"
#include "borda/rff.hpp"

namespace borda {

/// Shared-design norm estimator: fixed sample points, one factorization, many
/// functions. The quadratic form is computed as alpha.(y - jitter*alpha),
/// which equals alpha^T K alpha exactly under the regularized solve.
class RkhsNormEstimator {
public:
    RkhsNormEstimator(const KernelSpec& kernel, Eigen::MatrixXd points, double jitter = 1e-8)
        : points_(std::move(points)), jitter_(jitter) {
        kernel.validate();
        if (points_.rows() < 2) throw ConfigError("RkhsNormEstimator: need at least 2 points");
        const Eigen::MatrixXd gram = gram_matrix(kernel, points_);
        const auto result = detail::regularized_cholesky(gram, 0.0, jitter);
        jitter_ = result.jitter;
        factor_ = result.factor;
    }

    [[nodiscard]] const Eigen::MatrixXd& points() const { return points_; }
    [[nodiscard]] double jitter() const { return jitter_; }

    [[nodiscard]] double estimate(const Eigen::VectorXd& values) const {
        if (values.size() != points_.rows())
            throw ConfigError("RkhsNormEstimator: value count does not match sample points");
        const Eigen::VectorXd half = factor_.triangularView<Eigen::Lower>().solve(values);
        const Eigen::VectorXd alpha =
            factor_.transpose().triangularView<Eigen::Upper>().solve(half);
        const double quad = alpha.dot(values) - jitter_ * alpha.squaredNorm();
        return std::sqrt(std::max(quad, 0.0));
    }

private:
    Eigen::MatrixXd points_;
    Eigen::MatrixXd factor_;
    double jitter_;
};

/// Norm estimate of an arbitrary evaluable function of `dim` inputs on
/// num_points uniform samples from [0,1]^dim.
inline double estimate_rkhs_norm(const std::function<double(const Eigen::VectorXd&)>& f, int dim,
                                 const KernelSpec& kernel, int num_points, Rng& rng,
                                 double jitter = 1e-8) {
    if (num_points < 2) throw ConfigError("estimate_rkhs_norm: need at least 2 points");
    if (dim < 1) throw ConfigError("estimate_rkhs_norm: dimension must be positive");
    const Eigen::MatrixXd points = uniform_points(num_points, dim, rng);
    const RkhsNormEstimator estimator(kernel, points, jitter);
    Eigen::VectorXd values(points.rows());
    for (long i = 0; i < points.rows(); ++i) values[i] = f(points.row(i).transpose());
    return estimator.estimate(values);
}

struct NormStudyConfig {
    int num_points = 1000;        // sample points for the norm solve
    int quadrature_points = 1024; // borda quadrature nodes
    int num_features = 128;       // RFF features of the sampled rewards
    double reward_lengthscale = 0.3;
    double reward_stddev = 1.0;   // probe-grid stddev of the sampled rewards
    double jitter = 1e-5;
    int workers = 1;
};

struct NormFunctionRecord {
    int function_index = 0;
    double reward_norm = 0.0;
    double borda_norm = 0.0;
};

struct NormStudyResult {
    int context_dim = 0;
    int action_dim = 0;
    int num_functions = 0;
    double win_rate = 0.0;    // fraction of functions where the borda norm was smaller
    double win_margin = 0.0;  // mean (reward norm - borda norm)
    int ties = 0;             // exact float equality, counted as losses
    double mean_reward_norm = 0.0;
    double mean_borda_norm = 0.0;
    std::vector<NormFunctionRecord> per_function;
};

/// Reward-vs-borda norm comparison: sample reward functions, estimate the RKHS
/// norms of each reward and its borda function, and report how often the
/// borda function has the smaller norm. Norms are estimated under the same
/// SE kernel the rewards are drawn from, on one shared point sample per cell.
inline NormStudyResult run_norm_study(int context_dim, int action_dim, int num_functions,
                                      std::uint64_t seed, const NormStudyConfig& config = {}) {
    if (num_functions < 1) throw ConfigError("run_norm_study: need at least one function");
    if (context_dim < 0 || action_dim < 1)
        throw ConfigError("run_norm_study: context_dim must be >= 0 and action_dim >= 1");
    const int dim = context_dim + action_dim;
    KernelSpec kernel{KernelFamily::kSquaredExponential, config.reward_lengthscale, 1.0};

    Rng point_rng(derive_seed(seed, "norm-study-points"));
    const Eigen::MatrixXd points = uniform_points(config.num_points, dim, point_rng);
    const RkhsNormEstimator estimator(kernel, points, config.jitter);
    const Eigen::MatrixXd nodes = borda_quadrature_nodes(action_dim, config.quadrature_points);

    RffConfig rff;
    rff.lengthscale = config.reward_lengthscale;
    rff.target_stddev = config.reward_stddev;

    NormStudyResult result;
    result.context_dim = context_dim;
    result.action_dim = action_dim;
    result.num_functions = num_functions;
    result.per_function.resize(static_cast<std::size_t>(num_functions));

    const auto evaluate_function = [&](int index) {
        const RffBasis reward = sample_reward(context_dim, action_dim, config.num_features,
                                              derive_seed(seed, "fn-" + std::to_string(index)), rff);
        const Eigen::VectorXd reward_values = eval_reward_rows(reward, points);

        // Borda values at the sample points: each point's comparator slice is
        // evaluated against the shared quadrature nodes at that point's context.
        const Eigen::MatrixXd contexts = points.leftCols(context_dim);
        const Eigen::MatrixXd node_rewards = eval_reward_cross(reward, contexts, nodes);
        LinkFunction link{LinkFamily::kLogistic, 1.0};
        Eigen::VectorXd borda_values(points.rows());
        const double inv_q = 1.0 / static_cast<double>(nodes.rows());
        for (long i = 0; i < points.rows(); ++i) {
            double acc = 0.0;
            for (long q = 0; q < nodes.rows(); ++q)
                acc += link(reward_values[i] - node_rewards(i, q));
            borda_values[i] = acc * inv_q;
        }

        NormFunctionRecord record;
        record.function_index = index;
        record.reward_norm = estimator.estimate(reward_values);
        record.borda_norm = estimator.estimate(borda_values);
        result.per_function[static_cast<std::size_t>(index)] = record;
    };

    const int workers = std::max(config.workers, 1);
    if (workers == 1) {
        for (int i = 0; i < num_functions; ++i) evaluate_function(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int i = w; i < num_functions; i += workers) evaluate_function(i);
            });
        for (auto& thread : pool) thread.join();
    }

    long wins = 0;
    double margin = 0.0, reward_mean = 0.0, borda_mean = 0.0;
    for (const auto& record : result.per_function) {
        if (record.borda_norm < record.reward_norm) ++wins;
        if (record.borda_norm == record.reward_norm) ++result.ties;
        margin += record.reward_norm - record.borda_norm;
        reward_mean += record.reward_norm;
        borda_mean += record.borda_norm;
    }
    result.win_rate = static_cast<double>(wins) / static_cast<double>(num_functions);
    result.win_margin = margin / static_cast<double>(num_functions);
    result.mean_reward_norm = reward_mean / static_cast<double>(num_functions);
    result.mean_borda_norm = borda_mean / static_cast<double>(num_functions);
    return result;
}

}  // namespace borda
