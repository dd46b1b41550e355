#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "bvae/networks.hpp"
#include "bvae/training.hpp"

namespace bvae {

// Declarative description of a full run: dataset, model, both stage-1
// settings, stage 2, and the evaluation protocol. Every field has a default;
// the effective document is serialized verbatim into each run directory and
// addressed by its hash.
struct RunConfig {
    int data_n = 30;
    std::array<int, 3> data_dims{32, 32, 32};
    std::uint64_t data_seed = 7;

    ModelConfig model{};

    StageConfig stage1_large; // beta = 100
    StageConfig stage1_small; // beta = 0.0001 comparator
    StageConfig stage2;

    double eval_holdout_fraction = 0.2;
    std::uint64_t eval_split_seed = 99;
    double gamma = 1.0;
    double binarize_threshold = 0.5;
    bool deterministic = true;
    std::string out_root = "runs";

    RunConfig();
};

void to_json(nlohmann::json& j, const StageConfig& c);
void from_json(const nlohmann::json& j, StageConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

std::uint64_t config_hash(const RunConfig& config);
std::string config_hash_hex(const RunConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& config,
                      const std::filesystem::path& path);

} // namespace bvae
