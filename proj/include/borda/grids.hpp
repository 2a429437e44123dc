#pragma once

#include <Eigen/Dense>

#include <vector>

#include "borda/errors.hpp"

namespace borda {

/// Regular tensor grid on [0,1]^dim with points_per_dim nodes per axis
/// (endpoints included), one point per row in row-major axis order.
/// dim == 0 yields a single empty point (the degenerate context space).
inline Eigen::MatrixXd uniform_grid(int dim, int points_per_dim) {
    if (dim < 0) throw ConfigError("uniform_grid: negative dimension");
    if (dim == 0) return Eigen::MatrixXd(1, 0);
    if (points_per_dim < 1) throw ConfigError("uniform_grid: need at least one point per axis");
    long total = 1;
    for (int d = 0; d < dim; ++d) total *= points_per_dim;
    Eigen::MatrixXd grid(total, dim);
    const double step = points_per_dim > 1 ? 1.0 / (points_per_dim - 1) : 0.0;
    for (long i = 0; i < total; ++i) {
        long rest = i;
        for (int d = dim - 1; d >= 0; --d) {
            grid(i, d) = static_cast<double>(rest % points_per_dim) * step;
            rest /= points_per_dim;
        }
    }
    return grid;
}

/// Default per-axis resolution for evaluation grids: dense in 1D, coarser as
/// the dimension grows so the tensor product stays tractable.
inline int default_grid_resolution(int dim) {
    if (dim <= 1) return 101;
    if (dim == 2) return 33;
    if (dim == 3) return 11;
    return 5;
}

/// Concatenate a context row and an action row into one joint input row.
inline Eigen::VectorXd joint_point(const Eigen::VectorXd& context, const Eigen::VectorXd& action) {
    Eigen::VectorXd z(context.size() + action.size());
    if (context.size() > 0) z.head(context.size()) = context;
    if (action.size() > 0) z.tail(action.size()) = action;
    return z;
}

/// All (context, action) pairs as joint rows, context-major: row = ci * nA + ai.
inline Eigen::MatrixXd joint_grid(const Eigen::MatrixXd& contexts, const Eigen::MatrixXd& actions) {
    const long nx = contexts.rows(), na = actions.rows();
    Eigen::MatrixXd joint(nx * na, contexts.cols() + actions.cols());
    for (long i = 0; i < nx; ++i)
        for (long j = 0; j < na; ++j) {
            if (contexts.cols() > 0) joint.block(i * na + j, 0, 1, contexts.cols()) = contexts.row(i);
            if (actions.cols() > 0)
                joint.block(i * na + j, contexts.cols(), 1, actions.cols()) = actions.row(j);
        }
    return joint;
}

/// Index of the maximal entry; ties resolved to the lowest index.
inline long argmax_lowest_index(const Eigen::VectorXd& values) {
    if (values.size() == 0) throw ConfigError("argmax over empty vector");
    long best = 0;
    for (long i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

}  // namespace borda
