#pragma once

// Campaign orchestration: seeded multi-trial simulate runs, the norm study,
// toy active-DPO rounds, and emission of plot-ready tables plus a metadata
// file that can reproduce the campaign byte-for-byte.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "borda/acquisition.hpp"
#include "borda/config.hpp"
#include "borda/dpo.hpp"
#include "borda/environment.hpp"
#include "borda/errors.hpp"
#include "borda/grids.hpp"
#include "borda/posterior.hpp"
#include "borda/random.hpp"
#include "borda/records.hpp"
#include "borda/rff.hpp"
#include "borda/rkhs_norm.hpp"
#include "borda/strategies.hpp"
#include "borda/token_policy.hpp"
#include "borda/version.hpp"

namespace borda {

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    std::size_t pool_size = workers > 0 ? static_cast<std::size_t>(workers)
                                        : std::max(1u, std::thread::hardware_concurrency());
    pool_size = std::min(pool_size, count);
    if (pool_size <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < pool_size; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& thread : pool) thread.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline Environment make_environment(const SimulateConfig& config, std::uint64_t seed) {
    Environment env;
    env.context_dim = config.context_dim;
    env.action_dim = config.action_dim;
    env.reward = sample_reward(config.context_dim, config.action_dim, config.reward_features,
                               derive_seed(seed, "env"), config.reward);
    env.link = config.link;
    env.validate();
    return env;
}

struct TrialDiagnostics {
    std::uint64_t seed = 0;
    std::string strategy;
    double sigma_sq_sum = 0.0;  // sum of pre-update posterior variances at the queries
    double greedy_phi = 0.0;    // greedy info-gain estimate on the visited points
    double eta = 0.0;
    bool aborted = false;       // numerical failure cut the trial short
    std::string abort_reason;
};

struct SimulateOutput {
    std::vector<TrialRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<TrialDiagnostics> diagnostics;
};

namespace detail {

inline std::vector<long> checkpoint_schedule(const SimulateConfig& config) {
    std::vector<long> checkpoints{config.warmup_count};
    for (long t = config.warmup_count + config.eval_cadence; t < config.total_count;
         t += config.eval_cadence)
        checkpoints.push_back(t);
    if (config.total_count > config.warmup_count) checkpoints.push_back(config.total_count);
    return checkpoints;
}

struct SimTrial {
    std::vector<TrialRecord> records;
    std::vector<TimingRecord> timings;
    TrialDiagnostics diagnostics;
};

inline SimTrial run_simulate_trial(const SimulateConfig& config, std::uint64_t seed,
                                   StrategyKind kind) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    const Environment env = make_environment(config, seed);
    const Eigen::MatrixXd contexts = uniform_grid(config.context_dim, config.context_resolution);
    const Eigen::MatrixXd actions = uniform_grid(config.action_dim, config.action_resolution);

    Rng warmup_rng(derive_seed(seed, "warmup"));
    const auto warmup_data = warmup(env, config.warmup_count, warmup_rng);

    StrategyOptions options;
    options.info_grid_points = config.info_grid_points;
    options.capacity_hint = config.total_count;
    StrategyState state(kind, config.model_kernel, config.lambda, config.eta, config.beta,
                        contexts, actions, warmup_data, options);

    const auto checkpoints = checkpoint_schedule(config);
    std::vector<double> checkpoint_acquisition(checkpoints.size(), 0.0);
    std::vector<double> checkpoint_wall_ms(checkpoints.size(), 0.0);
    checkpoint_acquisition[0] = state.max_acquisition();
    checkpoint_wall_ms[0] =
        std::chrono::duration<double, std::milli>(Clock::now() - started).count() /
        std::max(config.warmup_count, 1);

    Rng run_rng(derive_seed(seed, "run-" + to_string(kind)));
    std::size_t pending = 1;
    auto interval_start = Clock::now();
    long interval_steps = 0;
    SimTrial trial;
    try {
        while (state.observation_count() < config.total_count) {
            state.step(env, run_rng);
            ++interval_steps;
            if (pending < checkpoints.size() &&
                state.observation_count() == checkpoints[pending]) {
                checkpoint_acquisition[pending] = state.last_acquisition();
                checkpoint_wall_ms[pending] =
                    std::chrono::duration<double, std::milli>(Clock::now() - interval_start)
                        .count() /
                    static_cast<double>(interval_steps);
                interval_start = Clock::now();
                interval_steps = 0;
                ++pending;
            }
        }
    } catch (const NumericalError& err) {
        // Keep the checkpoints that were reached and flag the trial partial.
        trial.diagnostics.aborted = true;
        trial.diagnostics.abort_reason = err.what();
    }

    std::vector<long> reached(checkpoints.begin(),
                              checkpoints.begin() + static_cast<long>(pending));
    const auto policies = state.extract_policies_at(reached);
    for (std::size_t k = 0; k < reached.size(); ++k) {
        const auto report = suboptimality(env, policies[k], contexts, actions);
        TrialRecord record;
        record.seed = seed;
        record.strategy = to_string(kind);
        record.step = reached[k];
        record.max_suboptimality = report.max;
        record.median_suboptimality = report.median;
        record.acquisition_value = checkpoint_acquisition[k];
        trial.records.push_back(std::move(record));
        trial.timings.push_back({seed, to_string(kind), reached[k], checkpoint_wall_ms[k]});
    }

    trial.diagnostics.seed = seed;
    trial.diagnostics.strategy = to_string(kind);
    trial.diagnostics.eta = config.eta;
    for (double v : state.posterior().sequential_variance_path())
        trial.diagnostics.sigma_sq_sum += v;
    if (state.posterior().size() > 0) {
        InfoGainTracker tracker(config.model_kernel, config.eta,
                                Eigen::MatrixXd(state.posterior().design_points()));
        tracker.advance(static_cast<int>(state.posterior().size()));
        trial.diagnostics.greedy_phi = tracker.phi();
    }
    return trial;
}

}  // namespace detail

inline SimulateOutput run_simulate(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment != ExperimentKind::kSimulate)
        throw ConfigError("run_simulate: config is not a simulate experiment");
    const auto& sim = config.simulate;

    struct Task {
        std::uint64_t seed;
        StrategyKind kind;
    };
    std::vector<Task> tasks;
    for (std::uint64_t seed : config.seeds)
        for (const auto& name : sim.strategies) tasks.push_back({seed, strategy_from_string(name)});

    std::vector<detail::SimTrial> trials(tasks.size());
    detail::parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        trials[i] = detail::run_simulate_trial(sim, tasks[i].seed, tasks[i].kind);
    });

    SimulateOutput output;
    for (const auto& trial : trials) {
        output.records.insert(output.records.end(), trial.records.begin(), trial.records.end());
        output.timings.insert(output.timings.end(), trial.timings.begin(), trial.timings.end());
        output.diagnostics.push_back(trial.diagnostics);
    }
    return output;
}

struct NormStudyOutput {
    std::vector<NormStudyRecord> records;
    std::vector<NormFunctionRow> raw;
};

inline NormStudyOutput run_norm_study_campaign(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment != ExperimentKind::kNormStudy)
        throw ConfigError("run_norm_study_campaign: config is not a norm-study experiment");
    NormStudyOutput output;
    NormStudyConfig study = config.norm_study.study;
    study.workers = config.workers;
    const std::uint64_t base_seed = config.seeds.front();
    for (const auto& cell : config.norm_study.cells) {
        const std::uint64_t cell_seed =
            derive_seed(base_seed, "norm-cell-" + std::to_string(cell.context_dim) + "-" +
                                       std::to_string(cell.action_dim));
        const auto result = run_norm_study(cell.context_dim, cell.action_dim, cell.num_functions,
                                           cell_seed, study);
        NormStudyRecord record;
        record.context_dim = result.context_dim;
        record.action_dim = result.action_dim;
        record.num_functions = result.num_functions;
        record.win_rate = result.win_rate;
        record.win_margin = result.win_margin;
        record.ties = result.ties;
        record.mean_reward_norm = result.mean_reward_norm;
        record.mean_borda_norm = result.mean_borda_norm;
        output.records.push_back(record);
        for (const auto& fn : result.per_function)
            output.raw.push_back({cell.context_dim, cell.action_dim, fn.function_index,
                                  fn.reward_norm, fn.borda_norm});
    }
    return output;
}

struct ToyDpoOutput {
    std::vector<DpoRoundRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<std::string> aborted_trials;  // "seed/arm: reason" entries
};

namespace detail {

inline TokenSequence random_toy_prompt(int vocab_size, int length, Rng& rng) {
    std::vector<TokenId> tokens;
    tokens.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i)
        tokens.push_back(
            1 + static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(vocab_size - 1))));
    return make_prompt(std::move(tokens));
}

/// Synthetic oracle reward on completions, configured by the oracle string.
inline double toy_oracle_reward(const std::string& oracle, int max_len,
                                const TokenSequence& completion) {
    if (oracle == "length")
        return static_cast<double>(completion.length()) / static_cast<double>(max_len);
    const TokenId target = static_cast<TokenId>(std::stoi(oracle.substr(6)));
    long count = 0;
    for (TokenId token : completion.tokens)
        if (token == target) ++count;
    return static_cast<double>(count) / static_cast<double>(max_len);
}

struct DpoTrial {
    std::vector<DpoRoundRecord> records;
    std::vector<TimingRecord> timings;
    bool aborted = false;
    std::string abort_reason;
};

inline DpoTrial run_toy_dpo_trial(const ToyDpoConfig& config, std::uint64_t seed,
                                  DpoAcquisitionKind arm) {
    using Clock = std::chrono::steady_clock;
    ToyPolicyConfig policy_config = config.policy;
    policy_config.seed = derive_seed(seed, "toy-policy");
    Eigen::MatrixXd params = ToyPolicy::random(policy_config).params();
    params.col(0).array() += config.end_bias;
    const ToyPolicy base = ToyPolicy::random(policy_config).with_params(std::move(params));
    const ToyPolicy reference = base.as_reference();
    ToyPolicy policy = base;

    ActiveDpoConfig round_config = config.round;
    round_config.acquisition = arm;

    LinkFunction link{LinkFamily::kLogistic, 1.0};
    Rng oracle_rng(derive_seed(seed, to_string(arm) + "-oracle"));
    const PreferenceOracle oracle = [&](const TokenSequence&, const TokenSequence& a,
                                        const TokenSequence& b) -> std::optional<int> {
        const double gap = toy_oracle_reward(config.oracle, round_config.max_len, a) -
                           toy_oracle_reward(config.oracle, round_config.max_len, b);
        return oracle_rng.bernoulli(link(gap));
    };

    Rng eval_rng(derive_seed(seed, "eval-prompts"));
    std::vector<TokenSequence> eval_prompts;
    for (int i = 0; i < config.eval_prompts; ++i)
        eval_prompts.push_back(
            random_toy_prompt(policy_config.vocab_size, config.prompt_length, eval_rng));

    // Deterministic round metric: the oracle's own preference probability of
    // the current policy's greedy decode against the frozen reference decode.
    const auto evaluate = [&](const ToyPolicy& current, double& win_rate, double& mean_length) {
        win_rate = 0.0;
        mean_length = 0.0;
        Rng greedy_rng(0);
        for (const auto& prompt : eval_prompts) {
            const auto mine =
                sample_completion(current, prompt, round_config.max_len, 0.0, greedy_rng);
            const auto theirs =
                sample_completion(reference, prompt, round_config.max_len, 0.0, greedy_rng);
            win_rate += link(toy_oracle_reward(config.oracle, round_config.max_len, mine) -
                             toy_oracle_reward(config.oracle, round_config.max_len, theirs));
            mean_length += static_cast<double>(mine.length());
        }
        win_rate /= static_cast<double>(eval_prompts.size());
        mean_length /= static_cast<double>(eval_prompts.size());
    };

    DpoTrial trial;
    double win_rate = 0.0, mean_length = 0.0;
    evaluate(policy, win_rate, mean_length);
    trial.records.push_back({seed, to_string(arm), 0, win_rate, mean_length, 0});
    trial.timings.push_back({seed, to_string(arm), 0, 0.0});

    Rng run_rng(derive_seed(seed, "run-" + to_string(arm)));
    long labels_total = 0;
    for (int round = 1; round <= config.rounds; ++round) {
        const auto round_start = Clock::now();
        std::vector<TokenSequence> pool;
        pool.reserve(static_cast<std::size_t>(config.pool_size));
        for (int i = 0; i < config.pool_size; ++i)
            pool.push_back(
                random_toy_prompt(policy_config.vocab_size, config.prompt_length, run_rng));
        try {
            auto result = active_dpo_round(policy, reference, pool, round_config, oracle, run_rng);
            policy = std::move(result.policy);
            labels_total += static_cast<long>(result.labeled.size());
        } catch (const OracleError& err) {
            // Aborted round: the policy is unchanged; keep what we have.
            trial.aborted = true;
            trial.abort_reason = err.what();
            break;
        }
        evaluate(policy, win_rate, mean_length);
        trial.records.push_back({seed, to_string(arm), round, win_rate, mean_length, labels_total});
        trial.timings.push_back(
            {seed, to_string(arm), round,
             std::chrono::duration<double, std::milli>(Clock::now() - round_start).count()});
    }
    return trial;
}

}  // namespace detail

inline ToyDpoOutput run_toy_dpo(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment != ExperimentKind::kToyDpo)
        throw ConfigError("run_toy_dpo: config is not a toy-dpo experiment");
    const auto& dpo = config.toy_dpo;

    struct Task {
        std::uint64_t seed;
        DpoAcquisitionKind arm;
    };
    std::vector<Task> tasks;
    for (std::uint64_t seed : config.seeds)
        for (const auto& name : dpo.arms) tasks.push_back({seed, dpo_acquisition_from_string(name)});

    std::vector<detail::DpoTrial> trials(tasks.size());
    detail::parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        trials[i] = detail::run_toy_dpo_trial(dpo, tasks[i].seed, tasks[i].arm);
    });

    ToyDpoOutput output;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& trial = trials[i];
        output.records.insert(output.records.end(), trial.records.begin(), trial.records.end());
        output.timings.insert(output.timings.end(), trial.timings.begin(), trial.timings.end());
        if (trial.aborted)
            output.aborted_trials.push_back(std::to_string(tasks[i].seed) + "/" +
                                            to_string(tasks[i].arm) + ": " + trial.abort_reason);
    }
    return output;
}

struct CampaignResult {
    ExperimentKind kind = ExperimentKind::kSimulate;
    SimulateOutput simulate;
    NormStudyOutput norm_study;
    ToyDpoOutput toy_dpo;
};

inline CampaignResult run_campaign(const ExperimentConfig& config) {
    CampaignResult result;
    result.kind = config.experiment;
    switch (config.experiment) {
        case ExperimentKind::kSimulate: result.simulate = run_simulate(config); break;
        case ExperimentKind::kNormStudy: result.norm_study = run_norm_study_campaign(config); break;
        case ExperimentKind::kToyDpo: result.toy_dpo = run_toy_dpo(config); break;
    }
    return result;
}

/// Writes the campaign tables plus metadata.json; returns the emitted paths.
/// Result tables are byte-stable across reruns; wall-clock timings go to the
/// separate timings.csv.
inline std::vector<std::string> emit_outputs(const ExperimentConfig& config,
                                             const CampaignResult& result,
                                             const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create output directory " + directory + ": " + ec.message());

    std::vector<std::string> files;
    const auto emit = [&](const std::string& name, const std::string& content) {
        const std::string path = directory + "/" + name;
        write_text_file(path, content);
        files.push_back(name);
    };

    switch (result.kind) {
        case ExperimentKind::kSimulate:
            emit("results.csv", to_csv(result.simulate.records));
            emit("timings.csv", to_csv(result.simulate.timings));
            break;
        case ExperimentKind::kNormStudy:
            emit("norm_study.csv", to_csv(result.norm_study.records));
            emit("norm_study_functions.csv", to_csv(result.norm_study.raw));
            break;
        case ExperimentKind::kToyDpo:
            emit("rounds.csv", to_csv(result.toy_dpo.records));
            emit("timings.csv", to_csv(result.toy_dpo.timings));
            break;
    }

    nlohmann::json metadata;
    metadata["library_version"] = kVersion;
    metadata["experiment"] = to_string(config.experiment);
    metadata["seeds"] = config.seeds;
    metadata["config"] = config;
    metadata["files"] = files;
    nlohmann::json aborted = nlohmann::json::array();
    for (const auto& diag : result.simulate.diagnostics)
        if (diag.aborted)
            aborted.push_back(std::to_string(diag.seed) + "/" + diag.strategy + ": " +
                              diag.abort_reason);
    for (const auto& entry : result.toy_dpo.aborted_trials) aborted.push_back(entry);
    metadata["aborted_trials"] = aborted;
    write_text_file(directory + "/metadata.json", metadata.dump(2) + "\n");
    files.push_back("metadata.json");
    return files;
}

}  // namespace borda
