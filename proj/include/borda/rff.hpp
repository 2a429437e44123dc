#pragma once

// Random Fourier Feature machinery for drawing ground-truth reward functions:
// r(z) = sum_j weights_j * cos(frequencies_j . z + phases_j), with frequencies
// sampled from the spectral density of a squared-exponential kernel.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "borda/errors.hpp"
#include "borda/random.hpp"

namespace borda {

struct RffConfig {
    double lengthscale = 0.3;       // spectral lengthscale of the generating SE kernel
    double target_stddev = 1.0;     // empirical stddev of r over the probe grid after rescaling
    int probe_points = 1024;        // Halton probe grid used for the rescaling
};

struct RffBasis {
    Eigen::MatrixXd frequencies;  // (num_features x input_dim)
    Eigen::VectorXd phases;       // in [0, 2*pi)
    Eigen::VectorXd weights;
    int context_dim = 0;
    int action_dim = 0;

    [[nodiscard]] int input_dim() const { return context_dim + action_dim; }
    [[nodiscard]] long num_features() const { return weights.size(); }

    void validate() const {
        if (frequencies.rows() != weights.size() || phases.size() != weights.size())
            throw ConfigError("RffBasis: feature count mismatch between frequencies, phases, weights");
        if (frequencies.cols() != input_dim())
            throw ConfigError("RffBasis: frequency dimension does not match context+action dims");
    }

    [[nodiscard]] double evaluate(const Eigen::VectorXd& joint) const {
        if (joint.size() != input_dim())
            throw ConfigError("RffBasis::evaluate: input dimension mismatch");
        return (weights.array() * ((frequencies * joint + phases).array().cos())).sum();
    }
};

inline double eval_reward(const RffBasis& basis, const Eigen::VectorXd& context,
                          const Eigen::VectorXd& action) {
    if (context.size() != basis.context_dim || action.size() != basis.action_dim)
        throw ConfigError("eval_reward: context/action dimension mismatch");
    Eigen::VectorXd joint(basis.input_dim());
    if (context.size() > 0) joint.head(context.size()) = context;
    if (action.size() > 0) joint.tail(action.size()) = action;
    return basis.evaluate(joint);
}

/// r evaluated at every row of a matrix of joint points.
inline Eigen::VectorXd eval_reward_rows(const RffBasis& basis, const Eigen::MatrixXd& joints) {
    if (joints.cols() != basis.input_dim())
        throw ConfigError("eval_reward_rows: input dimension mismatch");
    Eigen::MatrixXd phase = joints * basis.frequencies.transpose();  // (n x features)
    phase.rowwise() += basis.phases.transpose();
    return phase.array().cos().matrix() * basis.weights;
}

/// Cross table R(i, j) = r(contexts row i, actions row j), computed through
/// the angle-addition split so the cost is two GEMMs instead of an
/// (n_contexts * n_actions * features) triple loop.
inline Eigen::MatrixXd eval_reward_cross(const RffBasis& basis, const Eigen::MatrixXd& contexts,
                                         const Eigen::MatrixXd& actions) {
    if (contexts.cols() != basis.context_dim || actions.cols() != basis.action_dim)
        throw ConfigError("eval_reward_cross: dimension mismatch");
    const long features = basis.num_features();
    Eigen::MatrixXd context_angle = Eigen::MatrixXd::Zero(contexts.rows(), features);
    if (basis.context_dim > 0)
        context_angle = contexts * basis.frequencies.leftCols(basis.context_dim).transpose();
    context_angle.rowwise() += basis.phases.transpose();
    Eigen::MatrixXd action_angle = Eigen::MatrixXd::Zero(actions.rows(), features);
    if (basis.action_dim > 0)
        action_angle = actions * basis.frequencies.rightCols(basis.action_dim).transpose();

    // cos(u + v) = cos u cos v - sin u sin v, with the weights folded into u.
    Eigen::MatrixXd cu = context_angle.array().cos().matrix();
    Eigen::MatrixXd su = context_angle.array().sin().matrix();
    cu.array().rowwise() *= basis.weights.transpose().array();
    su.array().rowwise() *= basis.weights.transpose().array();
    const Eigen::MatrixXd cv = action_angle.array().cos().matrix();
    const Eigen::MatrixXd sv = action_angle.array().sin().matrix();
    return cu * cv.transpose() - su * sv.transpose();
}

/// Draw a random reward function. Frequencies ~ N(0, 1/lengthscale^2) per
/// coordinate, phases ~ U[0, 2*pi), weights standard normal rescaled so the
/// empirical stddev of r over a fixed Halton probe grid equals
/// config.target_stddev. Deterministic given the seed.
inline RffBasis sample_reward(int context_dim, int action_dim, int num_features,
                              std::uint64_t seed, const RffConfig& config = {}) {
    if (context_dim < 0 || action_dim < 0)
        throw ConfigError("sample_reward: dims must be non-negative");
    if (context_dim + action_dim < 1)
        throw ConfigError("sample_reward: need at least one input dimension");
    if (num_features < 1) throw ConfigError("sample_reward: need at least one feature");
    if (!(config.lengthscale > 0.0)) throw ConfigError("sample_reward: lengthscale must be positive");

    RffBasis basis;
    basis.context_dim = context_dim;
    basis.action_dim = action_dim;
    const int dim = context_dim + action_dim;
    basis.frequencies.resize(num_features, dim);
    basis.phases.resize(num_features);
    basis.weights.resize(num_features);

    Rng rng(seed);
    for (int j = 0; j < num_features; ++j)
        for (int d = 0; d < dim; ++d)
            basis.frequencies(j, d) = rng.normal() / config.lengthscale;
    for (int j = 0; j < num_features; ++j)
        basis.phases[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int j = 0; j < num_features; ++j) basis.weights[j] = rng.normal();

    const Eigen::MatrixXd probes = halton_points(config.probe_points, dim);
    const Eigen::VectorXd values = eval_reward_rows(basis, probes);
    const double mean = values.mean();
    const double stddev =
        std::sqrt((values.array() - mean).square().sum() / static_cast<double>(values.size() - 1));
    if (stddev > 1e-300) basis.weights *= config.target_stddev / stddev;
    return basis;
}

}  // namespace borda
