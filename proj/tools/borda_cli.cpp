// Experiment CLI: seeded campaigns for the kernelized dueling-bandit
// simulation, the RKHS norm study, and toy active-DPO rounds.
//
//   borda simulate   [--config cfg.json] [--out dir] [--workers n] ...
//   borda norm-study [--config cfg.json] ...
//   borda toy-dpo    [--config cfg.json] ...
//   borda emit       --config out/metadata.json [--out dir]
//
// `emit` reruns a campaign from an emitted metadata file (or a plain config)
// and writes the tables again; result tables are byte-identical across reruns
// of the same configuration.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "borda/campaign.hpp"
#include "borda/config.hpp"
#include "borda/errors.hpp"
#include "borda/version.hpp"

namespace {

/// Apply one "dotted.path=value" override onto the config JSON document.
void apply_override(nlohmann::json& document, const std::string& assignment) {
    const auto equals = assignment.find('=');
    if (equals == std::string::npos)
        throw borda::ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, equals);
    const std::string raw = assignment.substr(equals + 1);
    std::string pointer = "/";
    for (char c : path) pointer += c == '.' ? '/' : c;
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;  // bare strings need no quotes
    }
    document[nlohmann::json::json_pointer(pointer)] = value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active exploration for contextual dueling bandits"};
    app.set_version_flag("--version", borda::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::int64_t seed_offset = 0;
    int workers = -1;
    std::vector<std::string> overrides;

    const auto add_common = [&](CLI::App* command) {
        command->add_option("--config", config_path, "config or metadata JSON file");
        command->add_option("--out", out_dir, "output directory (overrides output_dir)");
        command->add_option("--seed-offset", seed_offset, "shift every seed by this amount");
        command->add_option("--workers", workers, "worker thread count (0 = hardware)");
        command->add_option("--set", overrides,
                            "config override, dotted path (e.g. --set simulate.T=200)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "kernelized dueling-bandit campaign");
    CLI::App* norm_study = app.add_subcommand("norm-study", "reward vs borda RKHS norm study");
    CLI::App* toy_dpo = app.add_subcommand("toy-dpo", "active DPO rounds on toy policies");
    CLI::App* emit = app.add_subcommand("emit", "rerun a campaign from config/metadata and emit");
    for (CLI::App* command : {simulate, norm_study, toy_dpo, emit}) add_common(command);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        borda::ExperimentConfig config;
        if (!config_path.empty()) config = borda::load_config(config_path);
        if (simulate->parsed()) config.experiment = borda::ExperimentKind::kSimulate;
        if (norm_study->parsed()) config.experiment = borda::ExperimentKind::kNormStudy;
        if (toy_dpo->parsed()) config.experiment = borda::ExperimentKind::kToyDpo;
        if (emit->parsed() && config_path.empty())
            throw borda::ConfigError("emit requires --config pointing at a config or metadata file");

        if (!overrides.empty()) {
            nlohmann::json document = config;
            for (const auto& assignment : overrides) apply_override(document, assignment);
            try {
                document.get_to(config);
            } catch (const nlohmann::json::exception& err) {
                throw borda::ConfigError(std::string("invalid override: ") + err.what());
            }
        }
        if (seed_offset != 0)
            for (auto& seed : config.seeds) seed += static_cast<std::uint64_t>(seed_offset);
        if (workers >= 0) config.workers = workers;
        if (!out_dir.empty()) config.output_dir = out_dir;
        config.validate();

        const auto result = borda::run_campaign(config);
        const auto files = borda::emit_outputs(config, result, config.output_dir);
        for (const auto& file : files)
            std::cout << config.output_dir << "/" << file << "\n";
        return 0;
    } catch (const borda::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const borda::IoError& err) {
        std::cerr << "i/o error: " << err.what() << "\n";
        return 3;
    } catch (const borda::NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}
