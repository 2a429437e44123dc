#include <catch2/catch.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "borda/acquisition.hpp"
#include "borda/dpo.hpp"
#include "borda/environment.hpp"
#include "borda/random.hpp"
#include "borda/token_policy.hpp"

using namespace borda;

namespace {

ToyPolicyConfig tiny_config(std::uint64_t seed, int vocab = 3, int max_len = 2) {
    ToyPolicyConfig config;
    config.vocab_size = vocab;
    config.max_len = max_len;
    config.num_masks = 4;
    config.dropout = 0.15;
    config.seed = seed;
    return config;
}

TokenSequence random_prompt(const ToyPolicyConfig& config, Rng& rng, int len = 2) {
    std::vector<TokenId> tokens;
    for (int i = 0; i < len; ++i)
        tokens.push_back(1 + static_cast<TokenId>(
                                 rng.uniform_index(static_cast<std::size_t>(config.vocab_size - 1))));
    return make_prompt(std::move(tokens));
}

struct EnumeratedCompletion {
    TokenSequence completion;
    double probability;
};

/// All completions reachable by autoregressive sampling with their exact
/// probabilities under the ensemble's sampling distribution (reference: the
/// single mask; otherwise the mask average). Matches sample_completion's
/// termination convention: the end token stops and is not stored; hitting
/// max_len stops without an end factor.
void enumerate_rec(const PolicyEnsemble& source, const TokenSequence& prompt,
                   std::vector<TokenId>& prefix, double probability, int max_len,
                   std::vector<EnumeratedCompletion>& out) {
    const Eigen::VectorXd probs = mask_averaged_distribution(
        source, prompt, std::span<const TokenId>(prefix.data(), prefix.size()));
    for (TokenId token = 0; token < source.vocab_size(); ++token) {
        const double p = probability * probs[token];
        if (token == source.end_token()) {
            out.push_back({make_completion(prefix), p});
        } else if (static_cast<int>(prefix.size()) + 1 == max_len) {
            std::vector<TokenId> done = prefix;
            done.push_back(token);
            out.push_back({make_completion(std::move(done)), p});
        } else {
            prefix.push_back(token);
            enumerate_rec(source, prompt, prefix, p, max_len, out);
            prefix.pop_back();
        }
    }
}

std::vector<EnumeratedCompletion> enumerate_completions(const PolicyEnsemble& source,
                                                        const TokenSequence& prompt,
                                                        int max_len) {
    std::vector<EnumeratedCompletion> out;
    std::vector<TokenId> prefix;
    enumerate_rec(source, prompt, prefix, 1.0, max_len, out);
    return out;
}

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

/// beta=0 log-ratio: mask-mean sequence log-prob minus reference log-prob.
double mean_log_ratio(const ToyPolicy& policy, const ToyPolicy& reference,
                      const TokenSequence& prompt, const TokenSequence& completion) {
    const auto bounds = sequence_bounds(policy, prompt, completion, 0.0);
    return bounds.upper - reference_sequence_log_prob(reference, prompt, completion);
}

}  // namespace

TEST_CASE("policy equal to reference gives bounds of exactly one half") {
    auto config = tiny_config(1);
    config.dropout = 0.0;  // all masks identical -> mask mean equals plain log-prob
    const auto policy = ToyPolicy::random(config);
    const auto reference = policy.as_reference();
    Rng rng(2);
    const auto prompt = random_prompt(config, rng);
    std::vector<TokenSequence> candidates{make_completion({1}), make_completion({2, 1}),
                                          make_completion()};
    std::vector<TokenSequence> comparators{make_completion({2}), make_completion({1, 2})};
    const auto estimate =
        generalized_borda_bounds(policy, reference, prompt, candidates, comparators, 0.5, 0.0);
    for (const auto& bounds : estimate.per_candidate) {
        CHECK(bounds.ucb == 0.5);
        CHECK(bounds.lcb == 0.5);
    }
    CHECK(acquisition_alpha(estimate).alpha == 0.0);
}

TEST_CASE("a self-duel at beta zero is exactly even") {
    const auto config = tiny_config(3);
    const auto policy = ToyPolicy::random(config);
    const auto reference = ToyPolicy::random(tiny_config(4)).as_reference();
    Rng rng(5);
    const auto prompt = random_prompt(config, rng);
    const std::vector<TokenSequence> candidate{make_completion({1, 2})};
    const auto estimate =
        generalized_borda_bounds(policy, reference, prompt, candidate, candidate, 1.3, 0.0);
    CHECK(estimate.per_candidate[0].ucb == Approx(0.5).margin(1e-12));
    CHECK(estimate.per_candidate[0].lcb == Approx(0.5).margin(1e-12));
}

TEST_CASE("monte-carlo plug-in estimate matches the exhaustive enumeration") {
    Rng master(7);
    for (int pair = 0; pair < 5; ++pair) {
        const auto config = tiny_config(100 + static_cast<std::uint64_t>(pair));
        const auto policy = ToyPolicy::random(config);
        const auto reference =
            ToyPolicy::random(tiny_config(200 + static_cast<std::uint64_t>(pair))).as_reference();
        const auto prompt = random_prompt(config, master);
        const std::vector<TokenSequence> candidates{make_completion({1}),
                                                    make_completion({2, 2})};

        // Exhaustive expectation of the implicit-reward preference under the
        // reference's exact completion distribution.
        const auto enumerated = enumerate_completions(reference, prompt, config.max_len);
        double mass = 0.0;
        for (const auto& entry : enumerated) mass += entry.probability;
        REQUIRE(mass == Approx(1.0).margin(1e-10));

        const double gamma = 0.8;
        const int draws = 2000;
        std::vector<TokenSequence> comparators;
        Rng sample_rng(master.next_u64());
        for (int i = 0; i < draws; ++i)
            comparators.push_back(
                sample_completion(reference, prompt, config.max_len, 1.0, sample_rng));
        const auto estimate = generalized_borda_bounds(policy, reference, prompt, candidates,
                                                       comparators, gamma, 0.0);

        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double own = mean_log_ratio(policy, reference, prompt, candidates[c]);
            double exact = 0.0, second_moment = 0.0;
            for (const auto& entry : enumerated) {
                const double other = mean_log_ratio(policy, reference, prompt, entry.completion);
                const double value = logistic(gamma * (own - other));
                exact += entry.probability * value;
                second_moment += entry.probability * value * value;
            }
            const double stderr_mc =
                std::sqrt(std::max(second_moment - exact * exact, 1e-12) / draws);
            CHECK(std::abs(estimate.per_candidate[c].ucb - exact) <= 3.0 * stderr_mc + 1e-9);
            CHECK(estimate.per_candidate[c].ucb ==
                  Approx(estimate.per_candidate[c].lcb).margin(1e-12));
        }
    }
}

TEST_CASE("bounds are ordered and widen with beta") {
    const auto config = tiny_config(11, 4, 3);
    const auto policy = ToyPolicy::random(config);
    const auto reference = ToyPolicy::random(tiny_config(12, 4, 3)).as_reference();
    Rng rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        const auto prompt = random_prompt(config, rng);
        std::vector<TokenSequence> candidates, comparators;
        for (int i = 0; i < 3; ++i)
            candidates.push_back(sample_completion(policy, prompt, 3, 1.0, rng));
        for (int i = 0; i < 4; ++i)
            comparators.push_back(sample_completion(reference, prompt, 3, 1.0, rng));
        const double gamma = 0.2 + rng.uniform();
        double previous_gap = -1.0;
        for (double beta : {0.0, 0.5, 2.0, 4.0}) {
            const auto estimate = generalized_borda_bounds(policy, reference, prompt, candidates,
                                                           comparators, gamma, beta);
            for (std::size_t c = 0; c < estimate.per_candidate.size(); ++c) {
                const auto& bounds = estimate.per_candidate[c];
                CHECK(bounds.ucb >= bounds.lcb - 1e-12);
                CHECK(bounds.ucb >= 0.0);
                CHECK(bounds.ucb <= 1.0);
                CHECK(bounds.lcb >= 0.0);
                CHECK(bounds.lcb <= 1.0);
            }
            const double gap = acquisition_alpha(estimate).alpha;
            CHECK(gap >= previous_gap - 1e-12);  // alpha grows with beta
            CHECK(gap >= -1e-12);
            previous_gap = gap;
        }
    }
}

TEST_CASE("alpha arithmetic") {
    const std::vector<CandidateBounds> single{{0.8, 0.3}};
    CHECK(alpha_from_bounds(single).alpha == Approx(0.5).margin(1e-15));
    const std::vector<CandidateBounds> rewards{{5.0, 3.0}, {2.0, 1.0}};
    CHECK(alpha_from_bounds(rewards).alpha == Approx(2.0).margin(1e-15));

    // Brute-force double max over random candidate sets.
    Rng rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<CandidateBounds> bounds;
        const int count = 1 + static_cast<int>(rng.uniform_index(6));
        for (int i = 0; i < count; ++i) {
            const double lcb = rng.uniform(-2.0, 2.0);
            bounds.push_back({lcb + rng.uniform(), lcb});
        }
        double max_ucb = -1e300, max_lcb = -1e300;
        for (const auto& b : bounds) {
            max_ucb = std::max(max_ucb, b.ucb);
            max_lcb = std::max(max_lcb, b.lcb);
        }
        CHECK(alpha_from_bounds(bounds).alpha == Approx(max_ucb - max_lcb).margin(1e-12));
    }
}

TEST_CASE("reward alpha vanishes at beta zero and matches brute force") {
    Rng rng(19);
    for (int rep = 0; rep < 50; ++rep) {
        const auto config = tiny_config(300 + static_cast<std::uint64_t>(rep), 4, 3);
        const auto policy = ToyPolicy::random(config);
        const auto reference =
            ToyPolicy::random(tiny_config(400 + static_cast<std::uint64_t>(rep), 4, 3))
                .as_reference();
        const auto prompt = random_prompt(config, rng);
        std::vector<TokenSequence> candidates;
        for (int i = 0; i < 3; ++i)
            candidates.push_back(sample_completion(policy, prompt, 3, 1.0, rng));
        const double gamma = 0.2 + rng.uniform();

        CHECK(reward_alpha(policy, reference, prompt, candidates, gamma, 0.0).alpha ==
              Approx(0.0).margin(1e-12));

        const double beta = rng.uniform(0.5, 4.0);
        double max_upper = -1e300, max_lower = -1e300;
        for (const auto& candidate : candidates) {
            const auto seq = sequence_bounds(policy, prompt, candidate, beta);
            const double ref = reference_sequence_log_prob(reference, prompt, candidate);
            max_upper = std::max(max_upper, gamma * (seq.upper - ref));
            max_lower = std::max(max_lower, gamma * (seq.lower - ref));
        }
        const double alpha = reward_alpha(policy, reference, prompt, candidates, gamma, beta).alpha;
        CHECK(alpha == Approx(max_upper - max_lower).margin(1e-10));
        CHECK(alpha >= -1e-12);
    }
}

TEST_CASE("select_batch keeps the top scores with stable ties") {
    Rng rng(23);

    // b = n returns everything, ordered by score.
    const std::vector<double> scores{0.3, 0.9, 0.1, 0.9};
    const auto all = select_batch(
        4, [&](std::size_t i, Rng&) { return scores[i]; }, 4, rng);
    CHECK(all == std::vector<std::size_t>{1, 3, 0, 2});

    // All-equal scores keep input order.
    const auto prefix = select_batch(
        5, [](std::size_t, Rng&) { return 1.0; }, 3, rng);
    CHECK(prefix == std::vector<std::size_t>{0, 1, 2});

    // Full-sort oracle on random score vectors.
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(20);
        const std::size_t b = 1 + rng.uniform_index(n);
        std::vector<double> values;
        for (std::size_t i = 0; i < n; ++i)
            values.push_back(rng.uniform_index(4) == 0 ? 0.5 : rng.uniform());  // force some ties
        const auto picked = select_batch(
            n, [&](std::size_t i, Rng&) { return values[i]; }, b, rng);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t c) { return values[a] > values[c]; });
        order.resize(b);
        CHECK(picked == order);
    }

    CHECK_THROWS_AS(select_batch(3, [](std::size_t, Rng&) { return 0.0; }, 0, rng), ConfigError);
    CHECK_THROWS_AS(select_batch(3, [](std::size_t, Rng&) { return 0.0; }, 4, rng), ConfigError);
}

TEST_CASE("alpha is invariant to uniform logit shifts of both policies") {
    // Dropout zero so a bias-row change shifts every masked logit uniformly;
    // the shift then cancels in all softmaxes and log-ratios.
    auto config = tiny_config(29, 4, 3);
    config.dropout = 0.0;
    auto policy = ToyPolicy::random(config);
    auto reference_config = tiny_config(31, 4, 3);
    reference_config.dropout = 0.0;
    auto reference_base = ToyPolicy::random(reference_config);
    Rng rng(37);
    const auto prompt = random_prompt(config, rng);
    std::vector<TokenSequence> candidates, comparators;
    for (int i = 0; i < 3; ++i) candidates.push_back(sample_completion(policy, prompt, 3, 1.0, rng));
    for (int i = 0; i < 5; ++i)
        comparators.push_back(
            sample_completion(reference_base.as_reference(), prompt, 3, 1.0, rng));

    const double base = acquisition_alpha(generalized_borda_bounds(
                                              policy, reference_base.as_reference(), prompt,
                                              candidates, comparators, 0.5, 2.0))
                            .alpha;

    Eigen::MatrixXd shifted_policy = policy.params();
    shifted_policy.row(0).array() += 11.0;
    Eigen::MatrixXd shifted_reference = reference_base.params();
    shifted_reference.row(0).array() -= 4.0;
    const double shifted =
        acquisition_alpha(generalized_borda_bounds(
                              policy.with_params(shifted_policy),
                              reference_base.with_params(shifted_reference).as_reference(), prompt,
                              candidates, comparators, 0.5, 2.0))
            .alpha;
    CHECK(shifted == Approx(base).margin(1e-9));
}

TEST_CASE("active dpo round with zero learning rate collects labels only") {
    const auto config = tiny_config(41, 6, 3);
    const auto reference = ToyPolicy::random(config).as_reference();
    const auto policy = ToyPolicy::random(config);
    Rng rng(43);
    std::vector<TokenSequence> pool;
    for (int i = 0; i < 10; ++i) pool.push_back(random_prompt(config, rng));

    ActiveDpoConfig round_config;
    round_config.batch = 4;
    round_config.max_len = 3;
    round_config.learning_rate = 0.0;
    round_config.candidates_per_prompt = 2;
    round_config.comparators_per_prompt = 3;

    long oracle_calls = 0;
    const PreferenceOracle oracle = [&](const TokenSequence&, const TokenSequence&,
                                        const TokenSequence&) -> std::optional<int> {
        ++oracle_calls;
        return 1;
    };
    Rng round_rng(47);
    const auto result = active_dpo_round(policy, reference, pool, round_config, oracle, round_rng);
    CHECK(result.policy.params() == policy.params());
    CHECK(result.labeled.size() == 4);
    CHECK(oracle_calls == 4);
}

TEST_CASE("oracle failure aborts the round") {
    const auto config = tiny_config(53, 6, 3);
    const auto reference = ToyPolicy::random(config).as_reference();
    const auto policy = ToyPolicy::random(config);
    Rng rng(59);
    std::vector<TokenSequence> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(random_prompt(config, rng));
    ActiveDpoConfig round_config;
    round_config.batch = 2;
    round_config.max_len = 3;
    const PreferenceOracle failing = [](const TokenSequence&, const TokenSequence&,
                                        const TokenSequence&) -> std::optional<int> {
        return std::nullopt;
    };
    Rng round_rng(61);
    CHECK_THROWS_AS(active_dpo_round(policy, reference, pool, round_config, failing, round_rng),
                    OracleError);
}

TEST_CASE("beta zero selection degenerates to the input-order prefix") {
    const auto config = tiny_config(67, 6, 3);
    const auto reference = ToyPolicy::random(config).as_reference();
    const auto policy = ToyPolicy::random(config);
    Rng rng(71);
    std::vector<TokenSequence> pool;
    for (int i = 0; i < 8; ++i) pool.push_back(random_prompt(config, rng));
    ActiveDpoConfig round_config;
    round_config.batch = 3;
    round_config.max_len = 3;
    round_config.beta = 0.0;
    const PreferenceOracle oracle = [](const TokenSequence&, const TokenSequence&,
                                       const TokenSequence&) -> std::optional<int> { return 0; };
    Rng round_rng(73);
    const auto result = active_dpo_round(policy, reference, pool, round_config, oracle, round_rng);
    CHECK(result.selected == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("length-preferring oracle lengthens greedy decodes over many rounds") {
    const auto config = tiny_config(79, 8, 4);
    // Bias the starting point toward early termination so greedy decodes have
    // headroom to grow.
    Eigen::MatrixXd short_params = ToyPolicy::random(config).params();
    short_params.col(0).array() += 1.5;
    const auto base = ToyPolicy::random(config).with_params(short_params);
    const auto reference = base.as_reference();
    auto policy = base;
    Rng rng(83);

    ActiveDpoConfig round_config;
    round_config.batch = 4;
    round_config.max_len = 4;
    round_config.candidates_per_prompt = 3;
    round_config.comparators_per_prompt = 4;
    round_config.learning_rate = 0.3;
    round_config.gamma = 0.3;

    LinkFunction link{LinkFamily::kLogistic, 1.0};
    Rng oracle_rng(89);
    const PreferenceOracle longer_wins = [&](const TokenSequence&, const TokenSequence& a,
                                             const TokenSequence& b) -> std::optional<int> {
        const double gap = static_cast<double>(a.length() - b.length());
        return oracle_rng.bernoulli(link(gap));
    };

    std::vector<TokenSequence> eval_prompts;
    for (int i = 0; i < 12; ++i) eval_prompts.push_back(random_prompt(config, rng));
    const auto mean_greedy_length = [&](const ToyPolicy& current) {
        double total = 0.0;
        Rng greedy_rng(1);
        for (const auto& prompt : eval_prompts)
            total += static_cast<double>(
                sample_completion(current, prompt, 4, 0.0, greedy_rng).length());
        return total / static_cast<double>(eval_prompts.size());
    };

    const double before = mean_greedy_length(policy);
    for (int round = 0; round < 200; ++round) {
        std::vector<TokenSequence> pool;
        for (int i = 0; i < 8; ++i) pool.push_back(random_prompt(config, rng));
        policy = active_dpo_round(policy, reference, pool, round_config, longer_wins, rng).policy;
    }
    const double after = mean_greedy_length(policy);
    CHECK(after > before + 0.3);
}

TEST_CASE("file oracle replays labeled tuples and flags misses") {
    const std::string path = "file_oracle_test.jsonl";
    std::vector<DpoExample> examples;
    DpoExample example;
    example.prompt = make_prompt({1, 2});
    example.action = make_completion({2});
    example.comparator = make_completion({1, 1});
    example.outcome = 1;
    examples.push_back(example);
    example.comparator = make_completion();
    example.outcome = 0;
    examples.push_back(example);
    FileOracle::write(path, examples);

    const FileOracle oracle(path);
    CHECK(oracle.size() == 2);
    CHECK(oracle(make_prompt({1, 2}), make_completion({2}), make_completion({1, 1})) == 1);
    CHECK(oracle(make_prompt({1, 2}), make_completion({2}), make_completion()) == 0);
    CHECK(!oracle(make_prompt({2, 2}), make_completion({2}), make_completion()).has_value());
    std::remove(path.c_str());
}
