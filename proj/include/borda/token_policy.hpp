#pragma once

// Token-level stochastic policies with dropout-mask-indexed log-probabilities.
// The concrete ToyPolicy is a bag-of-features linear-softmax model over a
// small vocabulary: cheap exact gradients, enumerable completions, and a
// deterministic finite mask ensemble so mean/spread statistics are exactly
// reproducible.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "borda/errors.hpp"
#include "borda/random.hpp"

namespace borda {

using TokenId = int;

struct TokenSequence {
    enum class Role { kPrompt, kCompletion };

    std::vector<TokenId> tokens;
    Role role = Role::kCompletion;

    [[nodiscard]] long length() const { return static_cast<long>(tokens.size()); }

    void validate() const {
        if (role == Role::kPrompt && tokens.empty())
            throw ConfigError("TokenSequence: prompts must be non-empty");
    }
};

inline TokenSequence make_prompt(std::vector<TokenId> tokens) {
    TokenSequence seq{std::move(tokens), TokenSequence::Role::kPrompt};
    seq.validate();
    return seq;
}

inline TokenSequence make_completion(std::vector<TokenId> tokens = {}) {
    return TokenSequence{std::move(tokens), TokenSequence::Role::kCompletion};
}

/// Token-level log-probability source indexed by dropout mask. Reference
/// policies expose a single deterministic mask.
class PolicyEnsemble {
public:
    virtual ~PolicyEnsemble() = default;

    [[nodiscard]] virtual int vocab_size() const = 0;
    [[nodiscard]] virtual int num_masks() const = 0;
    [[nodiscard]] virtual bool is_reference() const = 0;
    [[nodiscard]] virtual TokenId end_token() const = 0;

    /// Log-softmax over the vocabulary for one (prompt, prefix, mask).
    [[nodiscard]] virtual Eigen::VectorXd token_log_distribution(
        const TokenSequence& prompt, std::span<const TokenId> prefix, int mask_index) const = 0;

    [[nodiscard]] double token_log_prob(const TokenSequence& prompt,
                                        std::span<const TokenId> prefix, TokenId token,
                                        int mask_index) const {
        if (token < 0 || token >= vocab_size())
            throw ConfigError("token_log_prob: token id out of range");
        return token_log_distribution(prompt, prefix, mask_index)[token];
    }
};

struct TokenStats {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mask-ensemble mean and (centered, divisor m-1) standard deviation of one
/// token's log-probability.
inline TokenStats token_stats(const PolicyEnsemble& ensemble, const TokenSequence& prompt,
                              std::span<const TokenId> prefix, TokenId token) {
    const int m = ensemble.num_masks();
    if (m < 2) throw ConfigError("token_stats: need at least 2 masks");
    Eigen::VectorXd values(m);
    for (int j = 0; j < m; ++j) values[j] = ensemble.token_log_prob(prompt, prefix, token, j);
    const double mean = values.mean();
    const double var = (values.array() - mean).square().sum() / static_cast<double>(m - 1);
    return {mean, std::sqrt(std::max(var, 0.0))};
}

struct SequenceBounds {
    double upper = 0.0;
    double lower = 0.0;
};

/// Sum over completion tokens of mu_i +/- beta * sigma_i. The empty
/// completion yields (0, 0).
inline SequenceBounds sequence_bounds(const PolicyEnsemble& ensemble, const TokenSequence& prompt,
                                      const TokenSequence& completion, double beta) {
    if (beta < 0.0) throw ConfigError("sequence_bounds: beta must be non-negative");
    SequenceBounds bounds;
    for (long i = 0; i < completion.length(); ++i) {
        const std::span<const TokenId> prefix(completion.tokens.data(),
                                              static_cast<std::size_t>(i));
        const auto stats = token_stats(ensemble, prompt, prefix, completion.tokens[i]);
        bounds.upper += stats.mean + beta * stats.stddev;
        bounds.lower += stats.mean - beta * stats.stddev;
    }
    return bounds;
}

/// Mask-averaged next-token distribution (average of per-mask softmaxes).
inline Eigen::VectorXd mask_averaged_distribution(const PolicyEnsemble& ensemble,
                                                  const TokenSequence& prompt,
                                                  std::span<const TokenId> prefix) {
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(ensemble.vocab_size());
    const int m = ensemble.num_masks();
    for (int j = 0; j < m; ++j)
        probs += ensemble.token_log_distribution(prompt, prefix, j).array().exp().matrix();
    return probs / static_cast<double>(m);
}

/// Autoregressive sampling from the mask-averaged distribution, with
/// temperature applied as p^(1/T). Temperature zero decodes greedily.
/// Generation stops at the end token (not included in the result) or max_len.
inline TokenSequence sample_completion(const PolicyEnsemble& ensemble,
                                       const TokenSequence& prompt, int max_len,
                                       double temperature, Rng& rng) {
    if (max_len < 1) throw ConfigError("sample_completion: max_len must be at least 1");
    if (temperature < 0.0) throw ConfigError("sample_completion: temperature must be >= 0");
    TokenSequence completion = make_completion();
    completion.tokens.reserve(static_cast<std::size_t>(max_len));
    for (int step = 0; step < max_len; ++step) {
        const std::span<const TokenId> prefix(completion.tokens.data(),
                                              completion.tokens.size());
        const Eigen::VectorXd probs = mask_averaged_distribution(ensemble, prompt, prefix);
        TokenId token;
        if (temperature < 1e-12) {
            long best = 0;
            for (long v = 1; v < probs.size(); ++v)
                if (probs[v] > probs[best]) best = v;
            token = static_cast<TokenId>(best);
        } else {
            Eigen::VectorXd tempered = probs.array().pow(1.0 / temperature);
            tempered /= tempered.sum();
            double u = rng.uniform();
            long pick = tempered.size() - 1;
            for (long v = 0; v < tempered.size(); ++v) {
                u -= tempered[v];
                if (u < 0.0) {
                    pick = v;
                    break;
                }
            }
            token = static_cast<TokenId>(pick);
        }
        if (token == ensemble.end_token()) break;
        completion.tokens.push_back(token);
    }
    return completion;
}

struct ToyPolicyConfig {
    int vocab_size = 16;  // token ids 0..V-1; id 0 is the end token
    int max_len = 6;      // normalization horizon for prefix features
    int num_masks = 8;
    double dropout = 0.05;
    std::uint64_t seed = 0;
    double init_scale = 0.5;

    void validate() const {
        if (vocab_size < 2 || vocab_size > 64)
            throw ConfigError("ToyPolicyConfig: vocab_size must lie in [2, 64]");
        if (max_len < 1 || max_len > 8)
            throw ConfigError("ToyPolicyConfig: max_len must lie in [1, 8]");
        if (num_masks < 2) throw ConfigError("ToyPolicyConfig: need at least 2 masks");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ConfigError("ToyPolicyConfig: dropout must lie in [0, 1)");
    }
};

/// Bag-of-features linear-softmax policy. Features of (prompt, prefix):
/// [bias, prompt token frequencies, prefix token counts / max_len,
/// prefix length / max_len]. Each dropout mask zeroes a Bernoulli(p) subset
/// of the parameter tensor, seeded by (policy seed, mask index).
class ToyPolicy final : public PolicyEnsemble {
public:
    ToyPolicy(ToyPolicyConfig config, Eigen::MatrixXd params)
        : config_(config), params_(std::move(params)) {
        config_.validate();
        if (params_.rows() != feature_dim() || params_.cols() != config_.vocab_size)
            throw ConfigError("ToyPolicy: parameter tensor has the wrong shape");
        build_masks();
    }

    /// Fresh policy with normally-distributed parameters.
    static ToyPolicy random(const ToyPolicyConfig& config) {
        config.validate();
        const int features = 2 * config.vocab_size + 2;
        Rng rng(derive_seed(config.seed, "toy-policy-params"));
        Eigen::MatrixXd params(features, config.vocab_size);
        for (int f = 0; f < features; ++f)
            for (int v = 0; v < config.vocab_size; ++v)
                params(f, v) = config.init_scale * rng.normal();
        return ToyPolicy(config, std::move(params));
    }

    [[nodiscard]] ToyPolicy as_reference() const {
        ToyPolicy copy = *this;
        copy.reference_ = true;
        return copy;
    }

    [[nodiscard]] ToyPolicy with_params(Eigen::MatrixXd params) const {
        ToyPolicy copy = *this;
        if (params.rows() != params_.rows() || params.cols() != params_.cols())
            throw ConfigError("ToyPolicy::with_params: shape mismatch");
        copy.params_ = std::move(params);
        return copy;
    }

    [[nodiscard]] int vocab_size() const override { return config_.vocab_size; }
    [[nodiscard]] int num_masks() const override { return reference_ ? 1 : config_.num_masks; }
    [[nodiscard]] bool is_reference() const override { return reference_; }
    [[nodiscard]] TokenId end_token() const override { return 0; }
    [[nodiscard]] const ToyPolicyConfig& config() const { return config_; }
    [[nodiscard]] const Eigen::MatrixXd& params() const { return params_; }
    [[nodiscard]] int feature_dim() const { return 2 * config_.vocab_size + 2; }
    [[nodiscard]] const Eigen::ArrayXXd& mask(int index) const {
        return masks_[static_cast<std::size_t>(index)];
    }

    [[nodiscard]] Eigen::VectorXd features(const TokenSequence& prompt,
                                           std::span<const TokenId> prefix) const {
        prompt.validate();
        const int vocab = config_.vocab_size;
        Eigen::VectorXd phi = Eigen::VectorXd::Zero(feature_dim());
        phi[0] = 1.0;
        for (TokenId token : prompt.tokens) {
            if (token < 0 || token >= vocab) throw ConfigError("ToyPolicy: prompt token out of range");
            phi[1 + token] += 1.0;
        }
        phi.segment(1, vocab) /= static_cast<double>(prompt.tokens.size());
        for (TokenId token : prefix) {
            if (token < 0 || token >= vocab) throw ConfigError("ToyPolicy: prefix token out of range");
            phi[1 + vocab + token] += 1.0 / static_cast<double>(config_.max_len);
        }
        phi[1 + 2 * vocab] = static_cast<double>(prefix.size()) / static_cast<double>(config_.max_len);
        return phi;
    }

    /// Unmasked logits (the plain policy used by losses and gradients).
    [[nodiscard]] Eigen::VectorXd logits(const TokenSequence& prompt,
                                         std::span<const TokenId> prefix) const {
        return params_.transpose() * features(prompt, prefix);
    }

    [[nodiscard]] Eigen::VectorXd token_log_distribution(const TokenSequence& prompt,
                                                         std::span<const TokenId> prefix,
                                                         int mask_index) const override {
        if (mask_index < 0 || mask_index >= num_masks())
            throw ConfigError("ToyPolicy: mask index out of range");
        Eigen::VectorXd raw;
        if (reference_) {
            raw = logits(prompt, prefix);
        } else {
            const Eigen::MatrixXd masked =
                (params_.array() * masks_[static_cast<std::size_t>(mask_index)]).matrix();
            raw = masked.transpose() * features(prompt, prefix);
        }
        return log_softmax(raw);
    }

    static Eigen::VectorXd log_softmax(const Eigen::VectorXd& raw) {
        const double peak = raw.maxCoeff();
        const double log_norm = std::log((raw.array() - peak).exp().sum()) + peak;
        return raw.array() - log_norm;
    }

private:
    void build_masks() {
        masks_.clear();
        masks_.reserve(static_cast<std::size_t>(config_.num_masks));
        for (int j = 0; j < config_.num_masks; ++j) {
            Rng rng(derive_seed(config_.seed, "toy-policy-mask-" + std::to_string(j)));
            Eigen::ArrayXXd mask(feature_dim(), config_.vocab_size);
            for (int f = 0; f < feature_dim(); ++f)
                for (int v = 0; v < config_.vocab_size; ++v)
                    mask(f, v) = rng.uniform() < config_.dropout ? 0.0 : 1.0;
            masks_.push_back(std::move(mask));
        }
    }

    ToyPolicyConfig config_;
    Eigen::MatrixXd params_;
    std::vector<Eigen::ArrayXXd> masks_;
    bool reference_ = false;
};

}  // namespace borda
