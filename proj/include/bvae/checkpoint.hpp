#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bvae/networks.hpp"

namespace bvae {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Versioned checkpoint: <path>.json manifest (config, stage tag, epoch, seed,
// format version, section layout, blob checksum) + <path>.bin float32 blob.
struct Checkpoint {
    int version = 1;
    std::string stage_tag; // e.g. "stage1_beta100", "stage2_decoder", "aggregated"
    int epoch = 0;
    std::uint64_t seed = 0;
    double beta = 0.0;
    ModelConfig config;
    nlohmann::json extra; // provenance ids, optimizer settings, notes
    std::vector<std::pair<std::string, std::vector<float>>> sections;

    const std::vector<float>& section(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws CorruptFileError on checksum/size damage and UnsupportedFormatError
// on unknown format versions.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace bvae
