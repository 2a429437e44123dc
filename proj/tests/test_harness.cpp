#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "borda/campaign.hpp"
#include "borda/config.hpp"
#include "borda/records.hpp"

using namespace borda;

namespace {

ExperimentConfig tiny_simulate_config() {
    ExperimentConfig config;
    config.experiment = ExperimentKind::kSimulate;
    config.seeds = {0, 1};
    config.workers = 1;
    config.simulate.warmup_count = 10;
    config.simulate.total_count = 40;
    config.simulate.eval_cadence = 10;
    config.simulate.context_resolution = 21;
    config.simulate.action_resolution = 21;
    config.simulate.reward_features = 64;
    config.simulate.info_grid_points = 64;
    return config;
}

ExperimentConfig tiny_dpo_config() {
    ExperimentConfig config;
    config.experiment = ExperimentKind::kToyDpo;
    config.seeds = {0};
    config.workers = 1;
    config.toy_dpo.rounds = 3;
    config.toy_dpo.pool_size = 6;
    config.toy_dpo.eval_prompts = 8;
    config.toy_dpo.policy.vocab_size = 6;
    config.toy_dpo.policy.max_len = 3;
    config.toy_dpo.policy.num_masks = 4;
    config.toy_dpo.round.batch = 3;
    config.toy_dpo.round.max_len = 3;
    config.toy_dpo.round.candidates_per_prompt = 2;
    config.toy_dpo.round.comparators_per_prompt = 3;
    return config;
}

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) : path("harness_test_" + name) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("default configuration pins the standard experiment") {
    const ExperimentConfig config;
    CHECK(config.simulate.warmup_count == 25);
    CHECK(config.simulate.total_count == 500);
    CHECK(config.simulate.context_dim == 1);
    CHECK(config.simulate.action_dim == 1);
    CHECK(config.seeds.size() == 10);
    CHECK(config.simulate.strategies ==
          std::vector<std::string>{"ae-borda", "ucb-borda", "uniform-borda"});

    REQUIRE(config.norm_study.cells.size() == 6);
    const int expected[6][2] = {{0, 1}, {1, 1}, {1, 3}, {3, 1}, {3, 3}, {10, 10}};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(config.norm_study.cells[i].context_dim == expected[i][0]);
        CHECK(config.norm_study.cells[i].action_dim == expected[i][1]);
        CHECK(config.norm_study.cells[i].num_functions == (i == 5 ? 200 : 1000));
    }
}

TEST_CASE("config validation rejects inconsistent settings") {
    ExperimentConfig config;
    config.seeds.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);

    config = ExperimentConfig{};
    config.simulate.total_count = 10;
    config.simulate.warmup_count = 20;
    CHECK_THROWS_AS(config.validate(), ConfigError);

    config = ExperimentConfig{};
    config.simulate.strategies = {"nonsense"};
    CHECK_THROWS_AS(config.validate(), ConfigError);

    config = ExperimentConfig{};
    config.toy_dpo.oracle = "sauce";
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("config survives a json round trip with every field") {
    ExperimentConfig config = tiny_simulate_config();
    config.simulate.beta.mode = BetaSchedule::Mode::kTheoretical;
    config.simulate.beta.rkhs_bound = 3.25;
    config.simulate.model_kernel.lengthscale = 0.45;
    config.toy_dpo.oracle = "token:3";
    config.norm_study.study.jitter = 2.5e-6;

    const nlohmann::json as_json = config;
    ExperimentConfig parsed;
    as_json.get_to(parsed);
    const nlohmann::json round_tripped = parsed;
    CHECK(as_json == round_tripped);

    // Every top-level config section appears in the document.
    for (const char* key :
         {"experiment", "seeds", "workers", "output_dir", "simulate", "norm_study", "toy_dpo"})
        CHECK(as_json.contains(key));
}

TEST_CASE("warmup-only campaigns produce exactly one row per trial") {
    ExperimentConfig config = tiny_simulate_config();
    config.simulate.total_count = config.simulate.warmup_count;
    const auto output = run_simulate(config);
    CHECK(output.records.size() == config.seeds.size() * config.simulate.strategies.size());
    for (const auto& record : output.records) CHECK(record.step == config.simulate.warmup_count);
}

TEST_CASE("reruns and worker counts do not change the results") {
    ExperimentConfig config = tiny_simulate_config();
    const auto first = run_simulate(config);
    const auto second = run_simulate(config);
    CHECK(to_csv(first.records) == to_csv(second.records));

    ExperimentConfig parallel = config;
    parallel.workers = 2;
    const auto third = run_simulate(parallel);
    CHECK(to_csv(first.records) == to_csv(third.records));
}

TEST_CASE("emitted tables round trip and reruns are byte-identical") {
    TempDir dir_a("emit_a"), dir_b("emit_b");
    ExperimentConfig config = tiny_simulate_config();
    CampaignResult result = run_campaign(config);
    emit_outputs(config, result, dir_a.path);

    // Parse-back equals the in-memory records.
    const auto parsed = trial_records_from_csv(read_text_file(dir_a.path + "/results.csv"));
    REQUIRE(parsed.size() == result.simulate.records.size());
    CHECK(to_csv(parsed) == to_csv(result.simulate.records));

    // Rerun from the emitted metadata file: byte-identical result table.
    const auto reloaded = load_config(dir_a.path + "/metadata.json");
    CampaignResult again = run_campaign(reloaded);
    emit_outputs(reloaded, again, dir_b.path);
    CHECK(read_text_file(dir_a.path + "/results.csv") ==
          read_text_file(dir_b.path + "/results.csv"));
}

TEST_CASE("metadata embeds the full configuration") {
    TempDir dir("metadata");
    ExperimentConfig config = tiny_simulate_config();
    const CampaignResult result = run_campaign(config);
    emit_outputs(config, result, dir.path);
    const nlohmann::json metadata = nlohmann::json::parse(read_text_file(dir.path + "/metadata.json"));
    CHECK(metadata.at("library_version").get<std::string>() == kVersion);
    const nlohmann::json expected = config;
    CHECK(metadata.at("config") == expected);
    CHECK(metadata.at("files").size() == 2);
}

TEST_CASE("empty record lists emit header-only tables") {
    CHECK(to_csv(std::vector<TrialRecord>{}) ==
          "seed,strategy,step,max_suboptimality,median_suboptimality,acquisition_value\n");
    CHECK(trial_records_from_csv(to_csv(std::vector<TrialRecord>{})).empty());
}

TEST_CASE("csv doubles survive the round trip exactly") {
    std::vector<TrialRecord> records;
    TrialRecord r;
    r.seed = 7;
    r.strategy = "ae-borda";
    r.step = 123;
    r.max_suboptimality = 0.1 + 1e-17;
    r.median_suboptimality = 3.0e-300;
    r.acquisition_value = 1234567.89012345678;
    records.push_back(r);
    const auto parsed = trial_records_from_csv(to_csv(records));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].max_suboptimality == records[0].max_suboptimality);
    CHECK(parsed[0].median_suboptimality == records[0].median_suboptimality);
    CHECK(parsed[0].acquisition_value == records[0].acquisition_value);
}

TEST_CASE("toy dpo campaigns start even and stay even at zero learning rate") {
    ExperimentConfig config = tiny_dpo_config();
    config.toy_dpo.round.learning_rate = 0.0;
    const auto output = run_toy_dpo(config);
    for (const auto& record : output.records) {
        CHECK(record.win_rate == Approx(0.5).margin(1e-12));
        if (record.round == 0) CHECK(record.labels_total == 0);
    }
    // Labels are still collected every round.
    const auto& last = output.records.back();
    CHECK(last.labels_total ==
          static_cast<long>(config.toy_dpo.round.batch) * config.toy_dpo.rounds);
}

TEST_CASE("toy dpo campaigns are reproducible") {
    ExperimentConfig config = tiny_dpo_config();
    const auto first = run_toy_dpo(config);
    const auto second = run_toy_dpo(config);
    CHECK(to_csv(first.records) == to_csv(second.records));
}

TEST_CASE("single-function norm study cells have degenerate win rates") {
    ExperimentConfig config;
    config.experiment = ExperimentKind::kNormStudy;
    config.seeds = {3};
    config.workers = 1;
    config.norm_study.cells = {{1, 1, 1}};
    config.norm_study.study.num_points = 150;
    config.norm_study.study.quadrature_points = 64;
    const auto output = run_norm_study_campaign(config);
    REQUIRE(output.records.size() == 1);
    CHECK((output.records[0].win_rate == 0.0 || output.records[0].win_rate == 1.0));
    CHECK(output.raw.size() == 1);
}

TEST_CASE("norm study summary equals an aggregation of the raw rows") {
    ExperimentConfig config;
    config.experiment = ExperimentKind::kNormStudy;
    config.seeds = {5};
    config.workers = 2;
    config.norm_study.cells = {{1, 1, 12}, {0, 1, 8}};
    config.norm_study.study.num_points = 150;
    config.norm_study.study.quadrature_points = 64;
    const auto output = run_norm_study_campaign(config);
    REQUIRE(output.records.size() == 2);
    for (const auto& record : output.records) {
        long wins = 0, count = 0;
        double margin = 0.0;
        for (const auto& row : output.raw) {
            if (row.context_dim != record.context_dim || row.action_dim != record.action_dim)
                continue;
            ++count;
            if (row.borda_norm < row.reward_norm) ++wins;
            margin += row.reward_norm - row.borda_norm;
        }
        CHECK(count == record.num_functions);
        CHECK(record.win_rate == Approx(static_cast<double>(wins) / count).margin(1e-12));
        CHECK(record.win_margin == Approx(margin / count).margin(1e-12));
    }
}

TEST_CASE("ae-borda improves on its warmup policy") {
    ExperimentConfig config = tiny_simulate_config();
    config.seeds = {0, 1, 2};
    config.simulate.total_count = 150;
    config.simulate.strategies = {"ae-borda"};
    config.simulate.context_resolution = 41;
    config.simulate.action_resolution = 41;
    const auto output = run_simulate(config);
    double at_warmup = 0.0, at_end = 0.0;
    for (const auto& record : output.records) {
        if (record.step == config.simulate.warmup_count) at_warmup += record.max_suboptimality;
        if (record.step == config.simulate.total_count) at_end += record.max_suboptimality;
    }
    CHECK(at_end <= at_warmup);
}

TEST_CASE("rff bases round trip through json exactly") {
    const RffBasis basis = sample_reward(2, 1, 48, 777);
    const nlohmann::json as_json = basis;
    RffBasis restored;
    as_json.get_to(restored);
    CHECK(restored.frequencies == basis.frequencies);
    CHECK(restored.phases == basis.phases);
    CHECK(restored.weights == basis.weights);
    CHECK(restored.context_dim == basis.context_dim);
    CHECK(restored.action_dim == basis.action_dim);
}

TEST_CASE("toy policies round trip through json") {
    ToyPolicyConfig config;
    config.vocab_size = 6;
    config.max_len = 3;
    config.num_masks = 4;
    config.seed = 99;
    const auto policy = ToyPolicy::random(config);
    const auto restored = toy_policy_from_json(toy_policy_to_json(policy));
    CHECK(restored.params() == policy.params());
    CHECK(restored.num_masks() == policy.num_masks());
    for (int j = 0; j < policy.num_masks(); ++j) CHECK((restored.mask(j) == policy.mask(j)).all());

    const auto prompt = make_prompt({1, 2});
    for (int j = 0; j < policy.num_masks(); ++j)
        CHECK(restored.token_log_distribution(prompt, {}, j) ==
              policy.token_log_distribution(prompt, {}, j));

    const auto reference = toy_policy_from_json(toy_policy_to_json(policy.as_reference()));
    CHECK(reference.is_reference());
    CHECK(reference.num_masks() == 1);
}

TEST_CASE("clean campaigns report no aborted trials") {
    TempDir dir("aborted");
    ExperimentConfig config = tiny_simulate_config();
    emit_outputs(config, run_campaign(config), dir.path);
    const nlohmann::json metadata =
        nlohmann::json::parse(read_text_file(dir.path + "/metadata.json"));
    CHECK(metadata.at("aborted_trials").empty());
}

TEST_CASE("trial records keep monotone steps and non-negative gaps") {
    ExperimentConfig config = tiny_simulate_config();
    const auto output = run_simulate(config);
    std::uint64_t seed = output.records.front().seed;
    std::string strategy = output.records.front().strategy;
    long previous = -1;
    for (const auto& record : output.records) {
        CHECK(record.max_suboptimality >= 0.0);
        CHECK(record.median_suboptimality >= 0.0);
        CHECK(record.max_suboptimality >= record.median_suboptimality - 1e-12);
        if (record.seed == seed && record.strategy == strategy) {
            CHECK(record.step > previous);
            previous = record.step;
        } else {
            seed = record.seed;
            strategy = record.strategy;
            previous = record.step;
        }
    }
}
