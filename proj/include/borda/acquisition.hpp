#pragma once

// Generalized contextual Borda bounds over a policy ensemble, the acquisition
// score alpha(x) = max-candidate ucb - max-candidate lcb, the reward-bound
// variant, batched top-b prompt selection, and one full active-DPO round.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "borda/dpo.hpp"
#include "borda/errors.hpp"
#include "borda/random.hpp"
#include "borda/token_policy.hpp"

namespace borda {

/// Labeling failed (human/synthetic oracle unavailable for a tuple).
class OracleError : public std::runtime_error {
public:
    explicit OracleError(const std::string& what) : std::runtime_error(what) {}
};

struct CandidateBounds {
    double ucb = 0.0;
    double lcb = 0.0;
};

struct GeneralizedBordaEstimate {
    std::vector<CandidateBounds> per_candidate;
    int comparator_count = 0;
    int candidate_count = 0;
};

struct AcquisitionScore {
    double alpha = 0.0;
};

/// Sequence log-probability of a completion under the reference policy's
/// single deterministic mask.
inline double reference_sequence_log_prob(const PolicyEnsemble& reference,
                                          const TokenSequence& prompt,
                                          const TokenSequence& completion) {
    double total = 0.0;
    for (long i = 0; i < completion.length(); ++i) {
        const std::span<const TokenId> prefix(completion.tokens.data(),
                                              static_cast<std::size_t>(i));
        total += reference.token_log_prob(prompt, prefix, completion.tokens[i], 0);
    }
    return total;
}

/// Confidence bounds on the generalized Borda value of each candidate, with
/// comparators drawn from the reference policy. The optimistic bound pairs
/// the candidate's upper log-ratio with each comparator's lower log-ratio
/// inside the logistic implicit-reward preference; the pessimistic bound
/// swaps the roles. beta = 0 collapses both to the plug-in Monte Carlo
/// estimate.
inline GeneralizedBordaEstimate generalized_borda_bounds(
    const PolicyEnsemble& policy, const PolicyEnsemble& reference, const TokenSequence& prompt,
    std::span<const TokenSequence> candidates, std::span<const TokenSequence> comparators,
    double gamma, double beta) {
    if (candidates.empty() || comparators.empty())
        throw ConfigError("generalized_borda_bounds: candidates and comparators must be non-empty");
    if (!(gamma > 0.0)) throw ConfigError("generalized_borda_bounds: gamma must be positive");
    if (beta < 0.0) throw ConfigError("generalized_borda_bounds: beta must be non-negative");

    const auto logistic = [](double u) {
        if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
        const double e = std::exp(u);
        return e / (1.0 + e);
    };

    struct LogRatioInterval {
        double upper, lower;
    };
    const auto interval = [&](const TokenSequence& completion) {
        const auto bounds = sequence_bounds(policy, prompt, completion, beta);
        const double ref = reference_sequence_log_prob(reference, prompt, completion);
        return LogRatioInterval{bounds.upper - ref, bounds.lower - ref};
    };

    std::vector<LogRatioInterval> comparator_intervals;
    comparator_intervals.reserve(comparators.size());
    for (const auto& comparator : comparators) comparator_intervals.push_back(interval(comparator));

    GeneralizedBordaEstimate estimate;
    estimate.comparator_count = static_cast<int>(comparators.size());
    estimate.candidate_count = static_cast<int>(candidates.size());
    estimate.per_candidate.reserve(candidates.size());
    const double inv_n = 1.0 / static_cast<double>(comparators.size());
    for (const auto& candidate : candidates) {
        const LogRatioInterval own = interval(candidate);
        CandidateBounds bounds;
        for (const auto& other : comparator_intervals) {
            bounds.ucb += logistic(gamma * (own.upper - other.lower));
            bounds.lcb += logistic(gamma * (own.lower - other.upper));
        }
        bounds.ucb *= inv_n;
        bounds.lcb *= inv_n;
        estimate.per_candidate.push_back(bounds);
    }
    return estimate;
}

/// alpha = max-candidate ucb - max-candidate lcb (non-negative).
inline AcquisitionScore alpha_from_bounds(std::span<const CandidateBounds> bounds) {
    if (bounds.empty()) throw ConfigError("alpha_from_bounds: need at least one candidate");
    double max_ucb = bounds.front().ucb, max_lcb = bounds.front().lcb;
    for (const auto& candidate : bounds) {
        max_ucb = std::max(max_ucb, candidate.ucb);
        max_lcb = std::max(max_lcb, candidate.lcb);
    }
    return {max_ucb - max_lcb};
}

inline AcquisitionScore acquisition_alpha(const GeneralizedBordaEstimate& estimate) {
    return alpha_from_bounds(estimate.per_candidate);
}

/// Reward-bound acquisition: candidate intervals on the implicit DPO reward
/// gamma * (sequence bounds - reference log-prob); alpha is the gap between
/// the optimistic and pessimistic value maxima.
inline AcquisitionScore reward_alpha(const PolicyEnsemble& policy,
                                     const PolicyEnsemble& reference, const TokenSequence& prompt,
                                     std::span<const TokenSequence> candidates, double gamma,
                                     double beta) {
    if (candidates.empty()) throw ConfigError("reward_alpha: candidate set must be non-empty");
    if (!(gamma > 0.0)) throw ConfigError("reward_alpha: gamma must be positive");
    if (beta < 0.0) throw ConfigError("reward_alpha: beta must be non-negative");
    std::vector<CandidateBounds> bounds;
    bounds.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        const auto seq = sequence_bounds(policy, prompt, candidate, beta);
        const double ref = reference_sequence_log_prob(reference, prompt, candidate);
        bounds.push_back({gamma * (seq.upper - ref), gamma * (seq.lower - ref)});
    }
    return alpha_from_bounds(bounds);
}

/// Indices of the b highest-alpha prompts; ties keep input order. The scorer
/// receives the caller's RNG so candidate/comparator sampling is reproducible.
inline std::vector<std::size_t> select_batch(
    std::size_t num_prompts, const std::function<double(std::size_t, Rng&)>& scorer,
    std::size_t batch, Rng& rng) {
    if (batch < 1 || batch > num_prompts)
        throw ConfigError("select_batch: batch size out of range");
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(num_prompts);
    for (std::size_t i = 0; i < num_prompts; ++i) scored.emplace_back(scorer(i, rng), i);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> selected;
    selected.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) selected.push_back(scored[k].second);
    return selected;
}

/// Labeler contract: (prompt, a, a') -> {0,1}, empty on failure.
using PreferenceOracle = std::function<std::optional<int>(
    const TokenSequence&, const TokenSequence&, const TokenSequence&)>;

enum class DpoAcquisitionKind { kGeneralizedBorda, kRewardBound, kUniform };

inline std::string to_string(DpoAcquisitionKind kind) {
    switch (kind) {
        case DpoAcquisitionKind::kGeneralizedBorda: return "ae-borda-dpo";
        case DpoAcquisitionKind::kRewardBound: return "ae-dpo";
        case DpoAcquisitionKind::kUniform: return "uniform-dpo";
    }
    return "?";
}

inline DpoAcquisitionKind dpo_acquisition_from_string(const std::string& name) {
    if (name == "ae-borda-dpo") return DpoAcquisitionKind::kGeneralizedBorda;
    if (name == "ae-dpo") return DpoAcquisitionKind::kRewardBound;
    if (name == "uniform-dpo") return DpoAcquisitionKind::kUniform;
    throw ConfigError("unknown dpo acquisition: " + name);
}

struct ActiveDpoConfig {
    DpoAcquisitionKind acquisition = DpoAcquisitionKind::kGeneralizedBorda;
    int candidates_per_prompt = 4;   // policy samples scored per prompt
    int comparators_per_prompt = 8;  // reference samples per prompt
    std::size_t batch = 8;           // top-b prompts labeled per round
    int max_len = 6;
    double temperature = 1.0;
    double gamma = 0.3;
    double beta = 4.0;
    double learning_rate = 0.5;

    void validate() const {
        if (candidates_per_prompt < 1 || comparators_per_prompt < 1)
            throw ConfigError("ActiveDpoConfig: need at least one candidate and comparator");
        if (!(gamma > 0.0)) throw ConfigError("ActiveDpoConfig: gamma must be positive");
        if (beta < 0.0) throw ConfigError("ActiveDpoConfig: beta must be non-negative");
        if (learning_rate < 0.0) throw ConfigError("ActiveDpoConfig: learning rate must be >= 0");
        if (max_len < 1) throw ConfigError("ActiveDpoConfig: max_len must be >= 1");
    }
};

struct DpoRoundResult {
    ToyPolicy policy;
    std::vector<DpoExample> labeled;
    std::vector<double> alphas;           // per pool prompt
    std::vector<std::size_t> selected;    // pool indices that were labeled
};

/// One active-DPO round: sample candidates/comparators per prompt, score the
/// pool, keep the top-b prompts, pair the optimistic candidate against a
/// uniformly chosen reference sample, label through the oracle, and take one
/// DPO gradient step. Oracle failure aborts the round with the policy
/// unchanged. The uniform acquisition scores every prompt zero, so the tie
/// rule keeps the first b pool entries (the pool itself is the random object).
inline DpoRoundResult active_dpo_round(const ToyPolicy& policy, const ToyPolicy& reference,
                                       std::span<const TokenSequence> prompt_pool,
                                       const ActiveDpoConfig& config,
                                       const PreferenceOracle& oracle, Rng& rng) {
    config.validate();
    if (prompt_pool.empty()) throw ConfigError("active_dpo_round: empty prompt pool");
    if (config.batch > prompt_pool.size())
        throw ConfigError("active_dpo_round: batch exceeds pool size");

    struct PromptSamples {
        std::vector<TokenSequence> candidates;
        std::vector<TokenSequence> comparators;
    };
    std::vector<PromptSamples> samples(prompt_pool.size());
    for (std::size_t i = 0; i < prompt_pool.size(); ++i) {
        for (int c = 0; c < config.candidates_per_prompt; ++c)
            samples[i].candidates.push_back(sample_completion(
                policy, prompt_pool[i], config.max_len, config.temperature, rng));
        for (int c = 0; c < config.comparators_per_prompt; ++c)
            samples[i].comparators.push_back(sample_completion(
                reference, prompt_pool[i], config.max_len, config.temperature, rng));
    }

    std::vector<GeneralizedBordaEstimate> estimates(prompt_pool.size());
    const auto scorer = [&](std::size_t i, Rng&) -> double {
        switch (config.acquisition) {
            case DpoAcquisitionKind::kGeneralizedBorda: {
                estimates[i] = generalized_borda_bounds(policy, reference, prompt_pool[i],
                                                        samples[i].candidates,
                                                        samples[i].comparators, config.gamma,
                                                        config.beta);
                return acquisition_alpha(estimates[i]).alpha;
            }
            case DpoAcquisitionKind::kRewardBound:
                return reward_alpha(policy, reference, prompt_pool[i], samples[i].candidates,
                                    config.gamma, config.beta)
                    .alpha;
            case DpoAcquisitionKind::kUniform: return 0.0;
        }
        return 0.0;
    };

    DpoRoundResult result{policy, {}, {}, {}};
    result.alphas.resize(prompt_pool.size());
    Rng score_rng = rng.child("score");
    for (std::size_t i = 0; i < prompt_pool.size(); ++i)
        result.alphas[i] = scorer(i, score_rng);
    result.selected = select_batch(
        prompt_pool.size(), [&](std::size_t i, Rng&) { return result.alphas[i]; }, config.batch,
        rng);

    for (std::size_t index : result.selected) {
        const auto& prompt = prompt_pool[index];
        const auto& pool = samples[index];
        std::size_t best = 0;
        if (config.acquisition == DpoAcquisitionKind::kGeneralizedBorda) {
            const auto& bounds = estimates[index].per_candidate;
            for (std::size_t c = 1; c < bounds.size(); ++c)
                if (bounds[c].ucb > bounds[best].ucb) best = c;
        } else if (config.acquisition == DpoAcquisitionKind::kRewardBound) {
            double best_value = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < pool.candidates.size(); ++c) {
                const auto seq = sequence_bounds(policy, prompt, pool.candidates[c], config.beta);
                const double ref =
                    reference_sequence_log_prob(reference, prompt, pool.candidates[c]);
                const double upper = config.gamma * (seq.upper - ref);
                if (upper > best_value) {
                    best_value = upper;
                    best = c;
                }
            }
        }
        const std::size_t comparator_index = rng.uniform_index(pool.comparators.size());

        DpoExample example;
        example.prompt = prompt;
        example.action = pool.candidates[best];
        example.comparator = pool.comparators[comparator_index];
        const auto label = oracle(example.prompt, example.action, example.comparator);
        if (!label.has_value())
            throw OracleError("active_dpo_round: oracle failed to label a tuple; round aborted");
        example.outcome = *label;
        result.labeled.push_back(std::move(example));
    }

    result.policy = dpo_step(policy, reference, result.labeled, config.gamma,
                             config.learning_rate);
    return result;
}

namespace detail {

inline std::string token_key(const TokenSequence& prompt, const TokenSequence& a,
                             const TokenSequence& b) {
    std::string key;
    const auto append = [&key](const TokenSequence& seq) {
        for (TokenId token : seq.tokens) {
            key += std::to_string(token);
            key += ',';
        }
        key += '|';
    };
    append(prompt);
    append(a);
    append(b);
    return key;
}

}  // namespace detail

/// Replays labeled (prompt, a, a', w) tuples from a JSON-lines file; tuples
/// absent from the file signal failure (empty optional).
class FileOracle {
public:
    explicit FileOracle(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("FileOracle: cannot open " + path);
        std::string line;
        long line_number = 0;
        while (std::getline(in, line)) {
            ++line_number;
            if (line.empty()) continue;
            nlohmann::json record;
            try {
                record = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& err) {
                throw IoError("FileOracle: bad record at " + path + ":" +
                              std::to_string(line_number) + ": " + err.what());
            }
            TokenSequence prompt = make_prompt(record.at("prompt").get<std::vector<TokenId>>());
            TokenSequence a = make_completion(record.at("action").get<std::vector<TokenId>>());
            TokenSequence b =
                make_completion(record.at("comparator").get<std::vector<TokenId>>());
            labels_[detail::token_key(prompt, a, b)] = record.at("outcome").get<int>();
        }
    }

    static void write(const std::string& path, std::span<const DpoExample> examples) {
        std::ofstream out(path);
        if (!out) throw IoError("FileOracle: cannot write " + path);
        for (const auto& example : examples) {
            nlohmann::json record;
            record["prompt"] = example.prompt.tokens;
            record["action"] = example.action.tokens;
            record["comparator"] = example.comparator.tokens;
            record["outcome"] = example.outcome;
            out << record.dump() << '\n';
        }
    }

    [[nodiscard]] std::optional<int> operator()(const TokenSequence& prompt,
                                                const TokenSequence& a,
                                                const TokenSequence& b) const {
        const auto found = labels_.find(detail::token_key(prompt, a, b));
        if (found == labels_.end()) return std::nullopt;
        return found->second;
    }

    [[nodiscard]] std::size_t size() const { return labels_.size(); }

private:
    std::map<std::string, int> labels_;
};

}  // namespace borda
