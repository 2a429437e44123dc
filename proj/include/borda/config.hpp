#pragma once

// Experiment configuration: one human-editable JSON document per campaign,
// fully round-trippable so an emitted metadata file can reproduce its run.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "borda/acquisition.hpp"
#include "borda/environment.hpp"
#include "borda/errors.hpp"
#include "borda/kernels.hpp"
#include "borda/rff.hpp"
#include "borda/rkhs_norm.hpp"
#include "borda/strategies.hpp"
#include "borda/token_policy.hpp"

namespace borda {

enum class ExperimentKind { kSimulate, kNormStudy, kToyDpo };

inline std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::kSimulate: return "simulate";
        case ExperimentKind::kNormStudy: return "norm-study";
        case ExperimentKind::kToyDpo: return "toy-dpo";
    }
    return "?";
}

inline ExperimentKind experiment_from_string(const std::string& name) {
    if (name == "simulate") return ExperimentKind::kSimulate;
    if (name == "norm-study") return ExperimentKind::kNormStudy;
    if (name == "toy-dpo") return ExperimentKind::kToyDpo;
    throw ConfigError("unknown experiment: " + name);
}

struct SimulateConfig {
    int context_dim = 1;
    int action_dim = 1;
    int warmup_count = 25;  // n0
    int total_count = 500;  // T
    KernelSpec model_kernel{KernelFamily::kMatern52, 0.5, 0.25};
    double lambda = 0.1;
    double eta = 0.5;
    RffConfig reward{};  // SE lengthscale 0.3, unit stddev, 1024 probe points
    int reward_features = 128;
    LinkFunction link{LinkFamily::kLogistic, 1.0};
    std::vector<std::string> strategies{"ae-borda", "ucb-borda", "uniform-borda"};
    BetaSchedule beta{};  // fixed 2.0 by default
    int context_resolution = 101;
    int action_resolution = 101;
    int eval_cadence = 25;
    int info_grid_points = 256;

    void validate() const {
        if (context_dim < 0 || action_dim < 1)
            throw ConfigError("simulate: context_dim must be >= 0 and action_dim >= 1");
        if (warmup_count < 0 || total_count < warmup_count)
            throw ConfigError("simulate: need T >= n0 >= 0");
        if (strategies.empty()) throw ConfigError("simulate: need at least one strategy");
        for (const auto& name : strategies) strategy_from_string(name);
        model_kernel.validate();
        link.validate();
        beta.validate();
        if (!(lambda > 0.0) || !(eta > 0.0))
            throw ConfigError("simulate: lambda and eta must be positive");
        if (context_resolution < 1 || action_resolution < 2)
            throw ConfigError("simulate: grid resolutions too small");
        if (eval_cadence < 1) throw ConfigError("simulate: eval cadence must be >= 1");
        if (reward_features < 1) throw ConfigError("simulate: need at least one reward feature");
    }
};

struct NormStudyCell {
    int context_dim = 1;
    int action_dim = 1;
    int num_functions = 1000;
};

struct NormStudyCampaignConfig {
    std::vector<NormStudyCell> cells{{0, 1, 1000}, {1, 1, 1000},  {1, 3, 1000},
                                     {3, 1, 1000}, {3, 3, 1000}, {10, 10, 200}};
    NormStudyConfig study{};

    void validate() const {
        if (cells.empty()) throw ConfigError("norm-study: need at least one cell");
        for (const auto& cell : cells) {
            if (cell.context_dim < 0 || cell.action_dim < 1 || cell.num_functions < 1)
                throw ConfigError("norm-study: invalid cell");
        }
        if (study.num_points < 2 || study.quadrature_points < 2 || study.num_features < 1)
            throw ConfigError("norm-study: invalid study parameters");
    }
};

struct ToyDpoConfig {
    ToyPolicyConfig policy{};     // vocab 16, max_len 6, 8 masks, dropout 0.05
    ActiveDpoConfig round{};      // m=4 candidates, N=8 comparators, b=8, gamma 0.1, beta 4
    int rounds = 100;
    int pool_size = 48;
    int prompt_length = 3;
    int eval_prompts = 64;
    double end_bias = 1.0;  // added to the initial policy's end-token column
    std::vector<std::string> arms{"ae-borda-dpo", "ae-dpo", "uniform-dpo"};
    std::string oracle = "length";  // "length" or "token:<id>"

    void validate() const {
        policy.validate();
        round.validate();
        if (rounds < 1) throw ConfigError("toy-dpo: need at least one round");
        if (pool_size < 1 || round.batch > static_cast<std::size_t>(pool_size))
            throw ConfigError("toy-dpo: pool must hold at least the labeled batch");
        if (prompt_length < 1) throw ConfigError("toy-dpo: prompts must be non-empty");
        if (eval_prompts < 1) throw ConfigError("toy-dpo: need evaluation prompts");
        if (arms.empty()) throw ConfigError("toy-dpo: need at least one arm");
        for (const auto& name : arms) dpo_acquisition_from_string(name);
        if (oracle != "length" && oracle.rfind("token:", 0) != 0)
            throw ConfigError("toy-dpo: oracle must be 'length' or 'token:<id>'");
    }
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::kSimulate;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int workers = 0;  // 0 = hardware concurrency
    std::string output_dir = "out";
    SimulateConfig simulate{};
    NormStudyCampaignConfig norm_study{};
    ToyDpoConfig toy_dpo{};

    void validate() const {
        if (seeds.empty()) throw ConfigError("config: need at least one seed");
        if (workers < 0) throw ConfigError("config: workers must be >= 0");
        simulate.validate();
        norm_study.validate();
        toy_dpo.validate();
    }
};

// ---- JSON round trip ------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (long i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
    const long r = static_cast<long>(rows.size());
    const long c = r > 0 ? static_cast<long>(rows.at(0).size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
    return m;
}

}  // namespace detail

/// RffBasis round trip (trial reproducibility records).
inline void to_json(nlohmann::json& j, const RffBasis& basis) {
    j = {{"context_dim", basis.context_dim},
         {"action_dim", basis.action_dim},
         {"frequencies", detail::matrix_to_json(basis.frequencies)},
         {"phases", std::vector<double>(basis.phases.data(), basis.phases.data() + basis.phases.size())},
         {"weights", std::vector<double>(basis.weights.data(), basis.weights.data() + basis.weights.size())}};
}

inline void from_json(const nlohmann::json& j, RffBasis& basis) {
    basis.context_dim = j.at("context_dim").get<int>();
    basis.action_dim = j.at("action_dim").get<int>();
    basis.frequencies = detail::matrix_from_json(j.at("frequencies"));
    const auto phases = j.at("phases").get<std::vector<double>>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    basis.phases = Eigen::Map<const Eigen::VectorXd>(phases.data(), static_cast<long>(phases.size()));
    basis.weights =
        Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<long>(weights.size()));
    basis.validate();
}

inline void to_json(nlohmann::json& j, const KernelSpec& spec) {
    j = {{"family", to_string(spec.family)},
         {"lengthscale", spec.lengthscale},
         {"signal_variance", spec.signal_variance}};
}

inline void from_json(const nlohmann::json& j, KernelSpec& spec) {
    spec.family = kernel_family_from_string(j.value("family", to_string(spec.family)));
    spec.lengthscale = j.value("lengthscale", spec.lengthscale);
    spec.signal_variance = j.value("signal_variance", spec.signal_variance);
}

inline void to_json(nlohmann::json& j, const LinkFunction& link) {
    j = {{"family", to_string(link.family)}, {"scale", link.scale}};
}

inline void from_json(const nlohmann::json& j, LinkFunction& link) {
    link.family = link_family_from_string(j.value("family", to_string(link.family)));
    link.scale = j.value("scale", link.scale);
}

inline void to_json(nlohmann::json& j, const RffConfig& config) {
    j = {{"lengthscale", config.lengthscale},
         {"target_stddev", config.target_stddev},
         {"probe_points", config.probe_points}};
}

inline void from_json(const nlohmann::json& j, RffConfig& config) {
    config.lengthscale = j.value("lengthscale", config.lengthscale);
    config.target_stddev = j.value("target_stddev", config.target_stddev);
    config.probe_points = j.value("probe_points", config.probe_points);
}

inline void to_json(nlohmann::json& j, const BetaSchedule& beta) {
    j = {{"mode", beta.mode == BetaSchedule::Mode::kTheoretical ? "theoretical" : "fixed"},
         {"rkhs_bound", beta.rkhs_bound},
         {"delta", beta.delta},
         {"fixed_value", beta.fixed_value}};
}

inline void from_json(const nlohmann::json& j, BetaSchedule& beta) {
    const std::string mode = j.value("mode", "fixed");
    if (mode == "theoretical")
        beta.mode = BetaSchedule::Mode::kTheoretical;
    else if (mode == "fixed")
        beta.mode = BetaSchedule::Mode::kFixed;
    else
        throw ConfigError("unknown beta mode: " + mode);
    beta.rkhs_bound = j.value("rkhs_bound", beta.rkhs_bound);
    beta.delta = j.value("delta", beta.delta);
    beta.fixed_value = j.value("fixed_value", beta.fixed_value);
}

inline void to_json(nlohmann::json& j, const SimulateConfig& config) {
    j = {{"context_dim", config.context_dim},
         {"action_dim", config.action_dim},
         {"n0", config.warmup_count},
         {"T", config.total_count},
         {"model_kernel", config.model_kernel},
         {"lambda", config.lambda},
         {"eta", config.eta},
         {"reward", config.reward},
         {"reward_features", config.reward_features},
         {"link", config.link},
         {"strategies", config.strategies},
         {"beta", config.beta},
         {"context_resolution", config.context_resolution},
         {"action_resolution", config.action_resolution},
         {"eval_cadence", config.eval_cadence},
         {"info_grid_points", config.info_grid_points}};
}

inline void from_json(const nlohmann::json& j, SimulateConfig& config) {
    config.context_dim = j.value("context_dim", config.context_dim);
    config.action_dim = j.value("action_dim", config.action_dim);
    config.warmup_count = j.value("n0", config.warmup_count);
    config.total_count = j.value("T", config.total_count);
    if (j.contains("model_kernel")) j.at("model_kernel").get_to(config.model_kernel);
    config.lambda = j.value("lambda", config.lambda);
    config.eta = j.value("eta", config.eta);
    if (j.contains("reward")) j.at("reward").get_to(config.reward);
    config.reward_features = j.value("reward_features", config.reward_features);
    if (j.contains("link")) j.at("link").get_to(config.link);
    config.strategies = j.value("strategies", config.strategies);
    if (j.contains("beta")) j.at("beta").get_to(config.beta);
    config.context_resolution = j.value("context_resolution", config.context_resolution);
    config.action_resolution = j.value("action_resolution", config.action_resolution);
    config.eval_cadence = j.value("eval_cadence", config.eval_cadence);
    config.info_grid_points = j.value("info_grid_points", config.info_grid_points);
}

inline void to_json(nlohmann::json& j, const NormStudyCell& cell) {
    j = {{"context_dim", cell.context_dim},
         {"action_dim", cell.action_dim},
         {"num_functions", cell.num_functions}};
}

inline void from_json(const nlohmann::json& j, NormStudyCell& cell) {
    cell.context_dim = j.value("context_dim", cell.context_dim);
    cell.action_dim = j.value("action_dim", cell.action_dim);
    cell.num_functions = j.value("num_functions", cell.num_functions);
}

inline void to_json(nlohmann::json& j, const NormStudyCampaignConfig& config) {
    j = {{"cells", config.cells},
         {"num_points", config.study.num_points},
         {"quadrature_points", config.study.quadrature_points},
         {"num_features", config.study.num_features},
         {"reward_lengthscale", config.study.reward_lengthscale},
         {"reward_stddev", config.study.reward_stddev},
         {"jitter", config.study.jitter}};
}

inline void from_json(const nlohmann::json& j, NormStudyCampaignConfig& config) {
    config.cells = j.value("cells", config.cells);
    config.study.num_points = j.value("num_points", config.study.num_points);
    config.study.quadrature_points = j.value("quadrature_points", config.study.quadrature_points);
    config.study.num_features = j.value("num_features", config.study.num_features);
    config.study.reward_lengthscale =
        j.value("reward_lengthscale", config.study.reward_lengthscale);
    config.study.reward_stddev = j.value("reward_stddev", config.study.reward_stddev);
    config.study.jitter = j.value("jitter", config.study.jitter);
}

inline void to_json(nlohmann::json& j, const ToyPolicyConfig& config) {
    j = {{"vocab_size", config.vocab_size}, {"max_len", config.max_len},
         {"num_masks", config.num_masks},  {"dropout", config.dropout},
         {"seed", config.seed},            {"init_scale", config.init_scale}};
}

inline void from_json(const nlohmann::json& j, ToyPolicyConfig& config) {
    config.vocab_size = j.value("vocab_size", config.vocab_size);
    config.max_len = j.value("max_len", config.max_len);
    config.num_masks = j.value("num_masks", config.num_masks);
    config.dropout = j.value("dropout", config.dropout);
    config.seed = j.value("seed", config.seed);
    config.init_scale = j.value("init_scale", config.init_scale);
}

inline void to_json(nlohmann::json& j, const ActiveDpoConfig& config) {
    j = {{"acquisition", to_string(config.acquisition)},
         {"candidates_per_prompt", config.candidates_per_prompt},
         {"comparators_per_prompt", config.comparators_per_prompt},
         {"batch", config.batch},
         {"max_len", config.max_len},
         {"temperature", config.temperature},
         {"gamma", config.gamma},
         {"beta", config.beta},
         {"learning_rate", config.learning_rate}};
}

inline void from_json(const nlohmann::json& j, ActiveDpoConfig& config) {
    config.acquisition =
        dpo_acquisition_from_string(j.value("acquisition", to_string(config.acquisition)));
    config.candidates_per_prompt = j.value("candidates_per_prompt", config.candidates_per_prompt);
    config.comparators_per_prompt =
        j.value("comparators_per_prompt", config.comparators_per_prompt);
    config.batch = j.value("batch", config.batch);
    config.max_len = j.value("max_len", config.max_len);
    config.temperature = j.value("temperature", config.temperature);
    config.gamma = j.value("gamma", config.gamma);
    config.beta = j.value("beta", config.beta);
    config.learning_rate = j.value("learning_rate", config.learning_rate);
}

inline void to_json(nlohmann::json& j, const ToyDpoConfig& config) {
    j = {{"policy", config.policy},
         {"round", config.round},
         {"rounds", config.rounds},
         {"pool_size", config.pool_size},
         {"prompt_length", config.prompt_length},
         {"eval_prompts", config.eval_prompts},
         {"end_bias", config.end_bias},
         {"arms", config.arms},
         {"oracle", config.oracle}};
}

inline void from_json(const nlohmann::json& j, ToyDpoConfig& config) {
    if (j.contains("policy")) j.at("policy").get_to(config.policy);
    if (j.contains("round")) j.at("round").get_to(config.round);
    config.rounds = j.value("rounds", config.rounds);
    config.pool_size = j.value("pool_size", config.pool_size);
    config.prompt_length = j.value("prompt_length", config.prompt_length);
    config.eval_prompts = j.value("eval_prompts", config.eval_prompts);
    config.end_bias = j.value("end_bias", config.end_bias);
    config.arms = j.value("arms", config.arms);
    config.oracle = j.value("oracle", config.oracle);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& config) {
    j = {{"experiment", to_string(config.experiment)},
         {"seeds", config.seeds},
         {"workers", config.workers},
         {"output_dir", config.output_dir},
         {"simulate", config.simulate},
         {"norm_study", config.norm_study},
         {"toy_dpo", config.toy_dpo}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& config) {
    config.experiment =
        experiment_from_string(j.value("experiment", to_string(config.experiment)));
    config.seeds = j.value("seeds", config.seeds);
    config.workers = j.value("workers", config.workers);
    config.output_dir = j.value("output_dir", config.output_dir);
    if (j.contains("simulate")) j.at("simulate").get_to(config.simulate);
    if (j.contains("norm_study")) j.at("norm_study").get_to(config.norm_study);
    if (j.contains("toy_dpo")) j.at("toy_dpo").get_to(config.toy_dpo);
}

/// ToyPolicy round trip (experiment resume records). Masks regenerate from
/// the stored config/seed, so only parameters and config are persisted.
inline nlohmann::json toy_policy_to_json(const ToyPolicy& policy) {
    return {{"config", policy.config()},
            {"params", detail::matrix_to_json(policy.params())},
            {"reference", policy.is_reference()}};
}

inline ToyPolicy toy_policy_from_json(const nlohmann::json& j) {
    ToyPolicyConfig config;
    j.at("config").get_to(config);
    ToyPolicy policy(config, detail::matrix_from_json(j.at("params")));
    if (j.value("reference", false)) return policy.as_reference();
    return policy;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError("malformed config " + path + ": " + err.what());
    }
    // Metadata files embed the config under "config".
    if (j.contains("config") && j.contains("library_version")) j = j.at("config");
    ExperimentConfig config;
    try {
        j.get_to(config);
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError("invalid config " + path + ": " + err.what());
    }
    config.validate();
    return config;
}

}  // namespace borda
