#pragma once

// Result records and their delimited-text serialization. Doubles are printed
// with 17 significant digits so a parse round-trips to the identical value,
// and rerunning a campaign reproduces byte-identical tables. Wall-clock
// timings are deliberately kept out of the result tables (they can never be
// byte-stable) and live in a sidecar timing table instead.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "borda/errors.hpp"

namespace borda {

struct TrialRecord {
    std::uint64_t seed = 0;
    std::string strategy;
    long step = 0;  // observation count at the checkpoint
    double max_suboptimality = 0.0;
    double median_suboptimality = 0.0;
    double acquisition_value = 0.0;
};

struct TimingRecord {
    std::uint64_t seed = 0;
    std::string strategy;
    long step = 0;
    double wall_ms_per_step = 0.0;
};

struct DpoRoundRecord {
    std::uint64_t seed = 0;
    std::string arm;
    long round = 0;
    double win_rate = 0.0;
    double mean_greedy_length = 0.0;
    long labels_total = 0;
};

struct NormStudyRecord {
    int context_dim = 0;
    int action_dim = 0;
    int num_functions = 0;
    double win_rate = 0.0;
    double win_margin = 0.0;
    long ties = 0;
    double mean_reward_norm = 0.0;
    double mean_borda_norm = 0.0;
};

struct NormFunctionRow {
    int context_dim = 0;
    int action_dim = 0;
    int function_index = 0;
    double reward_norm = 0.0;
    double borda_norm = 0.0;
};

namespace detail {

inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace detail

inline std::string to_csv(const std::vector<TrialRecord>& records) {
    std::string out = "seed,strategy,step,max_suboptimality,median_suboptimality,acquisition_value\n";
    for (const auto& r : records) {
        out += std::to_string(r.seed) + ',' + r.strategy + ',' + std::to_string(r.step) + ',' +
               detail::format_double(r.max_suboptimality) + ',' +
               detail::format_double(r.median_suboptimality) + ',' +
               detail::format_double(r.acquisition_value) + '\n';
    }
    return out;
}

inline std::vector<TrialRecord> trial_records_from_csv(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line) ||
        line != "seed,strategy,step,max_suboptimality,median_suboptimality,acquisition_value")
        throw IoError("trial_records_from_csv: unexpected header");
    std::vector<TrialRecord> records;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 6) throw IoError("trial_records_from_csv: malformed row: " + line);
        TrialRecord r;
        r.seed = std::stoull(fields[0]);
        r.strategy = fields[1];
        r.step = std::stol(fields[2]);
        r.max_suboptimality = std::stod(fields[3]);
        r.median_suboptimality = std::stod(fields[4]);
        r.acquisition_value = std::stod(fields[5]);
        records.push_back(std::move(r));
    }
    return records;
}

inline std::string to_csv(const std::vector<TimingRecord>& records) {
    std::string out = "seed,strategy,step,wall_ms_per_step\n";
    for (const auto& r : records)
        out += std::to_string(r.seed) + ',' + r.strategy + ',' + std::to_string(r.step) + ',' +
               detail::format_double(r.wall_ms_per_step) + '\n';
    return out;
}

inline std::string to_csv(const std::vector<DpoRoundRecord>& records) {
    std::string out = "seed,strategy,round,win_rate,mean_greedy_length,labels_total\n";
    for (const auto& r : records)
        out += std::to_string(r.seed) + ',' + r.arm + ',' + std::to_string(r.round) + ',' +
               detail::format_double(r.win_rate) + ',' +
               detail::format_double(r.mean_greedy_length) + ',' +
               std::to_string(r.labels_total) + '\n';
    return out;
}

inline std::vector<DpoRoundRecord> dpo_records_from_csv(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line) ||
        line != "seed,strategy,round,win_rate,mean_greedy_length,labels_total")
        throw IoError("dpo_records_from_csv: unexpected header");
    std::vector<DpoRoundRecord> records;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 6) throw IoError("dpo_records_from_csv: malformed row: " + line);
        DpoRoundRecord r;
        r.seed = std::stoull(fields[0]);
        r.arm = fields[1];
        r.round = std::stol(fields[2]);
        r.win_rate = std::stod(fields[3]);
        r.mean_greedy_length = std::stod(fields[4]);
        r.labels_total = std::stol(fields[5]);
        records.push_back(std::move(r));
    }
    return records;
}

inline std::string to_csv(const std::vector<NormStudyRecord>& records) {
    std::string out =
        "context_dim,action_dim,num_functions,win_rate,win_margin,ties,mean_reward_norm,"
        "mean_borda_norm\n";
    for (const auto& r : records)
        out += std::to_string(r.context_dim) + ',' + std::to_string(r.action_dim) + ',' +
               std::to_string(r.num_functions) + ',' + detail::format_double(r.win_rate) + ',' +
               detail::format_double(r.win_margin) + ',' + std::to_string(r.ties) + ',' +
               detail::format_double(r.mean_reward_norm) + ',' +
               detail::format_double(r.mean_borda_norm) + '\n';
    return out;
}

inline std::vector<NormStudyRecord> norm_records_from_csv(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line) ||
        line !=
            "context_dim,action_dim,num_functions,win_rate,win_margin,ties,mean_reward_norm,"
            "mean_borda_norm")
        throw IoError("norm_records_from_csv: unexpected header");
    std::vector<NormStudyRecord> records;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 8) throw IoError("norm_records_from_csv: malformed row: " + line);
        NormStudyRecord r;
        r.context_dim = std::stoi(fields[0]);
        r.action_dim = std::stoi(fields[1]);
        r.num_functions = std::stoi(fields[2]);
        r.win_rate = std::stod(fields[3]);
        r.win_margin = std::stod(fields[4]);
        r.ties = std::stol(fields[5]);
        r.mean_reward_norm = std::stod(fields[6]);
        r.mean_borda_norm = std::stod(fields[7]);
        records.push_back(r);
    }
    return records;
}

inline std::string to_csv(const std::vector<NormFunctionRow>& rows) {
    std::string out = "context_dim,action_dim,function_index,reward_norm,borda_norm\n";
    for (const auto& r : rows)
        out += std::to_string(r.context_dim) + ',' + std::to_string(r.action_dim) + ',' +
               std::to_string(r.function_index) + ',' + detail::format_double(r.reward_norm) +
               ',' + detail::format_double(r.borda_norm) + '\n';
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace borda
