#pragma once

// DPO loss and gradient for the toy policy. Loss per example:
//   -log rho( gamma * (2w - 1) * ( logratio(a) - logratio(a') ) )
// with logratio(s) = log pi_theta(s|x) - log pi_ref(s|x), sequence
// log-probabilities summed over completion content tokens, and rho the
// logistic link. Any per-prompt constant added to both policies' sequence
// log-probs cancels in the logratio difference.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "borda/errors.hpp"
#include "borda/token_policy.hpp"

namespace borda {

struct DpoExample {
    TokenSequence prompt;
    TokenSequence action;      // a
    TokenSequence comparator;  // a'
    int outcome = 1;           // w = 1 when a was preferred

    void validate() const {
        prompt.validate();
        if (outcome != 0 && outcome != 1)
            throw ConfigError("DpoExample: outcome must be 0 or 1");
    }
};

/// Unmasked sequence log-probability over completion content tokens.
inline double sequence_log_prob(const ToyPolicy& policy, const TokenSequence& prompt,
                                const TokenSequence& completion) {
    double total = 0.0;
    for (long i = 0; i < completion.length(); ++i) {
        const std::span<const TokenId> prefix(completion.tokens.data(),
                                              static_cast<std::size_t>(i));
        const Eigen::VectorXd log_probs = ToyPolicy::log_softmax(policy.logits(prompt, prefix));
        const TokenId token = completion.tokens[static_cast<std::size_t>(i)];
        if (token < 0 || token >= policy.vocab_size())
            throw ConfigError("sequence_log_prob: token id out of range");
        total += log_probs[token];
    }
    return total;
}

namespace detail {

inline double logistic(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

inline double dpo_margin(const ToyPolicy& policy, const ToyPolicy& reference,
                         const DpoExample& example) {
    const double ratio_a = sequence_log_prob(policy, example.prompt, example.action) -
                           sequence_log_prob(reference, example.prompt, example.action);
    const double ratio_b = sequence_log_prob(policy, example.prompt, example.comparator) -
                           sequence_log_prob(reference, example.prompt, example.comparator);
    return ratio_a - ratio_b;
}

/// d log p(sequence) / d theta, accumulated into grad with a scalar weight.
inline void accumulate_sequence_grad(const ToyPolicy& policy, const TokenSequence& prompt,
                                     const TokenSequence& completion, double weight,
                                     Eigen::MatrixXd& grad) {
    for (long i = 0; i < completion.length(); ++i) {
        const std::span<const TokenId> prefix(completion.tokens.data(),
                                              static_cast<std::size_t>(i));
        const Eigen::VectorXd phi = policy.features(prompt, prefix);
        const Eigen::VectorXd probs =
            ToyPolicy::log_softmax(policy.logits(prompt, prefix)).array().exp();
        Eigen::VectorXd indicator = -probs;
        indicator[completion.tokens[static_cast<std::size_t>(i)]] += 1.0;
        grad.noalias() += weight * (phi * indicator.transpose());
    }
}

}  // namespace detail

inline double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference,
                       std::span<const DpoExample> batch, double gamma) {
    if (batch.empty()) throw ConfigError("dpo_loss: batch must be non-empty");
    if (!(gamma > 0.0)) throw ConfigError("dpo_loss: gamma must be positive");
    double total = 0.0;
    for (const auto& example : batch) {
        example.validate();
        const double sign = example.outcome == 1 ? 1.0 : -1.0;
        const double u = gamma * sign * detail::dpo_margin(policy, reference, example);
        // -log rho(u) = log(1 + exp(-u)), computed stably on both branches.
        total += u >= 0.0 ? std::log1p(std::exp(-u)) : -u + std::log1p(std::exp(u));
    }
    return total / static_cast<double>(batch.size());
}

/// Analytic gradient of dpo_loss with respect to the policy parameters.
inline Eigen::MatrixXd dpo_loss_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                         std::span<const DpoExample> batch, double gamma) {
    if (batch.empty()) throw ConfigError("dpo_loss_gradient: batch must be non-empty");
    if (!(gamma > 0.0)) throw ConfigError("dpo_loss_gradient: gamma must be positive");
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.params().rows(), policy.params().cols());
    for (const auto& example : batch) {
        example.validate();
        const double sign = example.outcome == 1 ? 1.0 : -1.0;
        const double u = gamma * sign * detail::dpo_margin(policy, reference, example);
        const double weight = -detail::logistic(-u) * gamma * sign;
        detail::accumulate_sequence_grad(policy, example.prompt, example.action, weight, grad);
        detail::accumulate_sequence_grad(policy, example.prompt, example.comparator, -weight,
                                         grad);
    }
    return grad / static_cast<double>(batch.size());
}

/// One gradient-descent step on the DPO loss.
inline ToyPolicy dpo_step(const ToyPolicy& policy, const ToyPolicy& reference,
                          std::span<const DpoExample> batch, double gamma, double learning_rate) {
    if (learning_rate < 0.0) throw ConfigError("dpo_step: learning rate must be non-negative");
    if (learning_rate == 0.0) return policy;
    const Eigen::MatrixXd grad = dpo_loss_gradient(policy, reference, batch, gamma);
    return policy.with_params(policy.params() - learning_rate * grad);
}

}  // namespace borda
