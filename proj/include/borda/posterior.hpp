#pragma once

// Kernel ridge regression over preference observations. Only (context, action)
// enters the regression input; the comparator is marginalized by the Borda
// construction. The Cholesky factor of (K + lambda I) is grown one row per
// observation, so the factor for the first m observations is always the
// leading m x m block -- prefix states stay queryable after the fact.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "borda/errors.hpp"
#include "borda/grids.hpp"
#include "borda/kernels.hpp"
#include "borda/random.hpp"

namespace borda {

struct PreferenceObservation {
    Eigen::VectorXd context;
    Eigen::VectorXd action;
    Eigen::VectorXd comparator;
    int outcome = 0;  // 1 if `action` was preferred

    void validate() const {
        if (outcome != 0 && outcome != 1)
            throw ConfigError("PreferenceObservation: outcome must be 0 or 1");
        if (comparator.size() != action.size())
            throw ConfigError("PreferenceObservation: comparator/action dimension mismatch");
    }

    [[nodiscard]] Eigen::VectorXd joint() const { return joint_point(context, action); }
};

namespace detail {

inline constexpr double kJitterLadder[] = {0.0, 1e-8, 1e-6, 1e-4};

/// Cholesky of (K + ridge I), escalating an extra diagonal jitter until the
/// factorization succeeds. Returns the factor and the jitter that was needed.
struct RegularizedCholesky {
    Eigen::MatrixXd factor;
    double jitter = 0.0;
};

inline RegularizedCholesky regularized_cholesky(const Eigen::MatrixXd& gram, double ridge,
                                                double min_jitter = 0.0) {
    std::vector<double> ladder;
    if (min_jitter == 0.0) {
        ladder.assign(std::begin(kJitterLadder), std::end(kJitterLadder));
    } else {
        ladder.push_back(min_jitter);
        for (double jitter : kJitterLadder)
            if (jitter > min_jitter) ladder.push_back(jitter);
        // Escalate beyond the standard ladder when the floor already exceeds it.
        if (ladder.size() == 1) {
            ladder.push_back(min_jitter * 100.0);
            ladder.push_back(min_jitter * 10000.0);
        }
    }
    for (double jitter : ladder) {
        Eigen::MatrixXd regularized = gram;
        regularized.diagonal().array() += ridge + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(regularized);
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
    const double min_diag = gram.rows() > 0 ? gram.diagonal().minCoeff() : 0.0;
    throw NumericalError("regularized_cholesky: factorization failed after jitter escalation (n=" +
                         std::to_string(gram.rows()) + ", ridge=" + std::to_string(ridge) +
                         ", min diagonal=" + std::to_string(min_diag) + ")");
}

}  // namespace detail

class PosteriorModel {
public:
    struct Prediction {
        double mean = 0.0;
        double stddev = 0.0;
    };

    /// Coordinates produced when one observation is absorbed; a selection
    /// cache uses them to extend its own solves without refactorizing.
    struct ExtensionDetail {
        Eigen::VectorXd chol_row;  // forward-solve coordinates against the old factor
        double diag = 0.0;         // new Cholesky diagonal entry
        double whitened_target = 0.0;
        bool refactorized = false;  // true when jitter escalation forced a full refit
    };

    PosteriorModel() = default;

    static PosteriorModel fit(const KernelSpec& kernel, double lambda,
                              const std::vector<PreferenceObservation>& data, double eta = 0.5,
                              int input_dim = -1) {
        kernel.validate();
        if (!(lambda > 0.0)) throw ConfigError("PosteriorModel: lambda must be positive");
        if (!(eta > 0.0)) throw ConfigError("PosteriorModel: eta must be positive");
        PosteriorModel model;
        model.kernel_ = kernel;
        model.lambda_ = lambda;
        model.eta_ = eta;
        model.input_dim_ = input_dim;
        if (data.empty()) return model;

        model.input_dim_ = static_cast<int>(data.front().joint().size());
        if (input_dim >= 0 && input_dim != model.input_dim_)
            throw ConfigError("PosteriorModel::fit: observation dimension does not match input_dim");
        const long n = static_cast<long>(data.size());
        model.reserve(n);
        for (long i = 0; i < n; ++i) {
            data[static_cast<std::size_t>(i)].validate();
            const Eigen::VectorXd z = data[static_cast<std::size_t>(i)].joint();
            if (z.size() != model.input_dim_)
                throw ConfigError("PosteriorModel::fit: inconsistent observation dimensions");
            model.points_.row(i) = z.transpose();
            model.targets_[i] = data[static_cast<std::size_t>(i)].outcome;
        }
        model.count_ = n;
        model.refactorize(0.0);
        return model;
    }

    /// Value-returning incremental update; identical (to factorization
    /// round-off) to a batch fit on the concatenated data.
    [[nodiscard]] PosteriorModel update(const PreferenceObservation& obs) const {
        PosteriorModel next = *this;
        next.absorb(obs);
        return next;
    }

    /// In-place single-observation extension of the factor.
    ExtensionDetail absorb(const PreferenceObservation& obs) {
        obs.validate();
        const Eigen::VectorXd z = obs.joint();
        if (input_dim_ < 0) input_dim_ = static_cast<int>(z.size());
        if (z.size() != input_dim_)
            throw ConfigError("PosteriorModel::absorb: observation dimension mismatch");

        ExtensionDetail detail;
        const long n = count_;
        reserve(n + 1);
        points_.row(n) = z.transpose();
        targets_[n] = obs.outcome;

        const double prior = kernel_prior_variance(kernel_, z);
        if (n == 0) {
            const double diag_sq = prior + lambda_ + jitter_;
            detail.diag = std::sqrt(diag_sq);
            chol_(0, 0) = detail.diag;
            whitened_[0] = targets_[0] / detail.diag;
            detail.whitened_target = whitened_[0];
            detail.chol_row.resize(0);
            count_ = 1;
            return detail;
        }

        const Eigen::VectorXd k = kernel_column(kernel_, points_.topRows(n), z);
        Eigen::VectorXd c = chol_.topLeftCorner(n, n)
                                .triangularView<Eigen::Lower>()
                                .solve(k);
        double diag_sq = prior + lambda_ + jitter_ - c.squaredNorm();
        if (!(diag_sq > 1e-12 * (prior + lambda_ + 1.0))) {
            // The Schur complement collapsed; refit everything at higher jitter.
            count_ = n + 1;
            const double floor = jitter_ == 0.0 ? 1e-8 : jitter_ * 100.0;
            refactorize(floor);
            detail.refactorized = true;
            detail.chol_row = chol_.row(n).head(n);
            detail.diag = chol_(n, n);
            detail.whitened_target = whitened_[n];
            return detail;
        }
        const double diag = std::sqrt(diag_sq);
        chol_.row(n).head(n) = c.transpose();
        chol_(n, n) = diag;
        whitened_[n] = (targets_[n] - c.dot(whitened_.head(n))) / diag;
        detail.chol_row = std::move(c);
        detail.diag = diag;
        detail.whitened_target = whitened_[n];
        count_ = n + 1;
        return detail;
    }

    [[nodiscard]] Prediction predict(const Eigen::VectorXd& z) const {
        if (input_dim_ >= 0 && z.size() != input_dim_)
            throw ConfigError("PosteriorModel::predict: dimension mismatch");
        const double prior = kernel_prior_variance(kernel_, z);
        if (count_ == 0) return {0.0, std::sqrt(std::max(prior, 0.0))};
        const Eigen::VectorXd k = kernel_column(kernel_, points_.topRows(count_), z);
        const Eigen::VectorXd c = chol_.topLeftCorner(count_, count_)
                                      .triangularView<Eigen::Lower>()
                                      .solve(k);
        const double mean = c.dot(whitened_.head(count_));
        const double variance = std::max(prior - c.squaredNorm(), 0.0);
        return {mean, std::sqrt(variance)};
    }

    [[nodiscard]] long size() const { return count_; }
    [[nodiscard]] int input_dim() const { return input_dim_; }
    [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] double eta() const { return eta_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> design_points() const {
        return points_.topRows(count_);
    }
    [[nodiscard]] Eigen::VectorBlock<const Eigen::VectorXd> targets() const {
        return head_of(targets_);
    }
    [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> chol_factor() const {
        return chol_.topLeftCorner(count_, count_);
    }
    /// u = L^{-1} w; prefix m of this vector belongs to the first-m model.
    [[nodiscard]] Eigen::VectorBlock<const Eigen::VectorXd> whitened_targets() const {
        return head_of(whitened_);
    }

    /// sigma^2_{i-1}(q_i) for each observation, read off the factor diagonal:
    /// (K + ridge I)_ii = row_i . row_i, so the pre-update posterior variance
    /// at q_i is L_ii^2 - lambda - jitter.
    [[nodiscard]] std::vector<double> sequential_variance_path() const {
        std::vector<double> path(static_cast<std::size_t>(count_));
        for (long i = 0; i < count_; ++i) {
            const double d = chol_(i, i);
            path[static_cast<std::size_t>(i)] = std::max(d * d - lambda_ - jitter_, 0.0);
        }
        return path;
    }

private:
    [[nodiscard]] Eigen::VectorBlock<const Eigen::VectorXd> head_of(
        const Eigen::VectorXd& v) const {
        return v.head(count_);
    }

    void reserve(long n) {
        if (points_.rows() >= n) return;
        long cap = points_.rows() > 0 ? points_.rows() : 16;
        while (cap < n) cap *= 2;
        Eigen::MatrixXd points(cap, input_dim_ >= 0 ? input_dim_ : 0);
        Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(cap, cap);
        Eigen::VectorXd targets(cap), whitened(cap);
        if (count_ > 0) {
            points.topRows(count_) = points_.topRows(count_);
            chol.topLeftCorner(count_, count_) = chol_.topLeftCorner(count_, count_);
            targets.head(count_) = targets_.head(count_);
            whitened.head(count_) = whitened_.head(count_);
        } else if (points_.rows() == 0 && input_dim_ >= 0) {
            points.resize(cap, input_dim_);
        }
        points_ = std::move(points);
        chol_ = std::move(chol);
        targets_ = std::move(targets);
        whitened_ = std::move(whitened);
    }

    void refactorize(double min_jitter) {
        const Eigen::MatrixXd gram = gram_matrix(kernel_, points_.topRows(count_));
        auto result = detail::regularized_cholesky(gram, lambda_, min_jitter);
        jitter_ = result.jitter;
        chol_.topLeftCorner(count_, count_) = result.factor;
        whitened_.head(count_) = result.factor.triangularView<Eigen::Lower>().solve(
            targets_.head(count_));
    }

    KernelSpec kernel_{};
    double lambda_ = 0.1;
    double eta_ = 0.5;
    double jitter_ = 0.0;
    int input_dim_ = -1;
    long count_ = 0;
    Eigen::MatrixXd points_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd targets_;
    Eigen::VectorXd whitened_;
};

/// Greedy accumulation of information gain on a fixed probe set: repeatedly
/// take the probe of maximal current variance (posterior with noise eta^2)
/// and add (1/2) log(1 + sigma^2 / eta^2). Exhausting a probe set in any
/// order telescopes to (1/2) log det(I + eta^-2 K).
class InfoGainTracker {
public:
    InfoGainTracker(const KernelSpec& kernel, double eta, Eigen::MatrixXd probes)
        : eta_sq_(eta * eta), probes_(std::move(probes)) {
        kernel.validate();
        if (!(eta > 0.0)) throw ConfigError("InfoGainTracker: eta must be positive");
        gram_ = gram_matrix(kernel, probes_);
        variance_ = gram_.diagonal();
        const long p = probes_.rows();
        coeffs_.resize(0, p);
        chol_.resize(0, 0);
    }

    double advance(int steps) {
        for (int s = 0; s < steps; ++s) advance_one();
        return phi_;
    }

    [[nodiscard]] double phi() const { return phi_; }
    [[nodiscard]] long count() const { return static_cast<long>(selected_.size()); }

private:
    void advance_one() {
        const long p = probes_.rows();
        long best = 0;
        for (long j = 1; j < p; ++j)
            if (variance_[j] > variance_[best]) best = j;
        const double sigma_sq = std::max(variance_[best], 0.0);
        phi_ += 0.5 * std::log1p(sigma_sq / eta_sq_);

        const long m = count();
        if (coeffs_.rows() <= m) {
            const long cap = coeffs_.rows() > 0 ? coeffs_.rows() * 2 : 32;
            Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(cap, p);
            Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(cap, cap);
            if (m > 0) {
                coeffs.topRows(m) = coeffs_.topRows(m);
                chol.topLeftCorner(m, m) = chol_.topLeftCorner(m, m);
            }
            coeffs_ = std::move(coeffs);
            chol_ = std::move(chol);
        }

        Eigen::VectorXd c(m);
        for (long i = 0; i < m; ++i) c[i] = coeffs_(i, best);
        const double diag_sq = std::max(gram_(best, best) + eta_sq_ - c.squaredNorm(), 1e-12);
        const double diag = std::sqrt(diag_sq);
        chol_.row(m).head(m) = c.transpose();
        chol_(m, m) = diag;

        Eigen::RowVectorXd cross = gram_.row(best);
        if (m > 0) cross.noalias() -= c.transpose() * coeffs_.topRows(m);
        cross /= diag;
        coeffs_.row(m) = cross;
        variance_ -= cross.transpose().cwiseAbs2();
        variance_ = variance_.cwiseMax(0.0);
        selected_.push_back(best);
    }

    double eta_sq_;
    Eigen::MatrixXd probes_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd coeffs_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd variance_;
    std::vector<long> selected_;
    double phi_ = 0.0;
};

/// Greedy estimate Phi_hat_t of the maximum information gain after t rounds,
/// on a quasi-random probe grid over the model's input cube.
inline double estimate_info_gain(const PosteriorModel& model, int t, int grid_points = 256) {
    if (t < 0) throw ConfigError("estimate_info_gain: t must be non-negative");
    if (t == 0) return 0.0;
    if (model.input_dim() < 0)
        throw ConfigError("estimate_info_gain: model input dimension unknown");
    InfoGainTracker tracker(model.kernel(), model.eta(),
                            halton_points(grid_points, model.input_dim()));
    return tracker.advance(t);
}

/// Exact information gain (1/2) log det(I + eta^-2 K) of a concrete point set.
inline double info_gain_of_points(const KernelSpec& kernel, double eta,
                                  const Eigen::MatrixXd& points) {
    if (points.rows() == 0) return 0.0;
    Eigen::MatrixXd m = gram_matrix(kernel, points) / (eta * eta);
    m.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalError("info_gain_of_points: factorization failed");
    double logdet = 0.0;
    const Eigen::MatrixXd factor = llt.matrixL();
    for (long i = 0; i < factor.rows(); ++i) logdet += std::log(factor(i, i));
    return logdet;
}

}  // namespace borda
