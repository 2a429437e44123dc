#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "borda/errors.hpp"

namespace borda {

enum class KernelFamily { kSquaredExponential, kMatern52, kMatern32, kLinear };

inline std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::kSquaredExponential: return "squared-exponential";
        case KernelFamily::kMatern52: return "matern-5/2";
        case KernelFamily::kMatern32: return "matern-3/2";
        case KernelFamily::kLinear: return "linear";
    }
    return "?";
}

inline KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "squared-exponential" || name == "se") return KernelFamily::kSquaredExponential;
    if (name == "matern-5/2" || name == "matern52") return KernelFamily::kMatern52;
    if (name == "matern-3/2" || name == "matern32") return KernelFamily::kMatern32;
    if (name == "linear") return KernelFamily::kLinear;
    throw ConfigError("unknown kernel family: " + name);
}

struct KernelSpec {
    KernelFamily family = KernelFamily::kSquaredExponential;
    double lengthscale = 0.3;
    double signal_variance = 1.0;

    void validate() const {
        if (!(lengthscale > 0.0)) throw ConfigError("kernel lengthscale must be positive");
        if (!(signal_variance > 0.0)) throw ConfigError("kernel signal variance must be positive");
    }

    [[nodiscard]] bool stationary() const { return family != KernelFamily::kLinear; }
};

namespace detail {

inline double stationary_value(const KernelSpec& spec, double distance) {
    const double scaled = distance / spec.lengthscale;
    switch (spec.family) {
        case KernelFamily::kSquaredExponential:
            return spec.signal_variance * std::exp(-0.5 * scaled * scaled);
        case KernelFamily::kMatern52: {
            const double z = std::sqrt(5.0) * scaled;
            return spec.signal_variance * (1.0 + z + z * z / 3.0) * std::exp(-z);
        }
        case KernelFamily::kMatern32: {
            const double z = std::sqrt(3.0) * scaled;
            return spec.signal_variance * (1.0 + z) * std::exp(-z);
        }
        case KernelFamily::kLinear: break;
    }
    throw ConfigError("stationary_value called on a non-stationary kernel");
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& z1,
                          const Eigen::VectorXd& z2) {
    if (z1.size() != z2.size())
        throw ConfigError("eval_kernel: dimension mismatch (" + std::to_string(z1.size()) +
                          " vs " + std::to_string(z2.size()) + ")");
    if (spec.family == KernelFamily::kLinear) return spec.signal_variance * z1.dot(z2);
    return detail::stationary_value(spec, (z1 - z2).norm());
}

/// kappa(z, z); constant for stationary families, ||z||^2-scaled for linear.
inline double kernel_prior_variance(const KernelSpec& spec, const Eigen::VectorXd& z) {
    if (spec.family == KernelFamily::kLinear) return spec.signal_variance * z.squaredNorm();
    return spec.signal_variance;
}

/// Gram matrix K(i,j) = kappa(points row i, points row j).
inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points) {
    const long n = points.rows();
    if (spec.family == KernelFamily::kLinear)
        return spec.signal_variance * (points * points.transpose());
    // ||xi - xj||^2 through the inner-product expansion, clamped against
    // cancellation before the sqrt.
    const Eigen::VectorXd sq = points.rowwise().squaredNorm();
    Eigen::MatrixXd dist2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                            2.0 * (points * points.transpose());
    Eigen::MatrixXd gram(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            gram(i, j) = detail::stationary_value(spec, std::sqrt(std::max(dist2(i, j), 0.0)));
    return gram;
}

/// Column vector k(i) = kappa(points row i, z).
inline Eigen::VectorXd kernel_column(const KernelSpec& spec, const Eigen::MatrixXd& points,
                                     const Eigen::VectorXd& z) {
    if (points.cols() != z.size())
        throw ConfigError("kernel_column: dimension mismatch");
    const long n = points.rows();
    Eigen::VectorXd column(n);
    if (spec.family == KernelFamily::kLinear) {
        column = spec.signal_variance * (points * z);
        return column;
    }
    for (long i = 0; i < n; ++i)
        column[i] = detail::stationary_value(spec, (points.row(i).transpose() - z).norm());
    return column;
}

/// Cross Gram matrix K(i,j) = kappa(rows row i, cols row j).
inline Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& rows,
                                  const Eigen::MatrixXd& cols) {
    if (rows.cols() != cols.cols()) throw ConfigError("cross_gram: dimension mismatch");
    if (spec.family == KernelFamily::kLinear)
        return spec.signal_variance * (rows * cols.transpose());
    const Eigen::VectorXd sr = rows.rowwise().squaredNorm();
    const Eigen::VectorXd sc = cols.rowwise().squaredNorm();
    Eigen::MatrixXd dist2 = sr.replicate(1, cols.rows()) +
                            sc.transpose().replicate(rows.rows(), 1) -
                            2.0 * (rows * cols.transpose());
    Eigen::MatrixXd out(rows.rows(), cols.rows());
    for (long i = 0; i < rows.rows(); ++i)
        for (long j = 0; j < cols.rows(); ++j)
            out(i, j) = detail::stationary_value(spec, std::sqrt(std::max(dist2(i, j), 0.0)));
    return out;
}

}  // namespace borda
