#include "bvae/run_config.hpp"

#include <cstdio>
#include <fstream>

#include "bvae/checkpoint.hpp"
#include "bvae/voxel.hpp"

namespace bvae {

RunConfig::RunConfig() {
    model.seed = 1;

    stage1_large.stage = 1;
    stage1_large.beta = 100.0;     // the paper's "large" setting
    stage1_large.epochs = 200;
    stage1_large.seed = 11;

    stage1_small = stage1_large;
    stage1_small.beta = 0.0001;    // the paper's regular-VAE comparator
    stage1_small.seed = 12;

    stage2.stage = 2;
    stage2.beta = 0.0;
    stage2.epochs = 1200;          // 6x the stage-1 budget
    stage2.seed = 13;
}

void to_json(nlohmann::json& j, const StageConfig& c) {
    j = {{"stage", c.stage},
         {"beta", c.beta},
         {"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"recon_loss_scale", c.recon_loss_scale},
         {"deterministic", c.deterministic}};
}

void from_json(const nlohmann::json& j, StageConfig& c) {
    StageConfig defaults;
    c.stage = j.value("stage", defaults.stage);
    c.beta = j.value("beta", defaults.beta);
    c.epochs = j.value("epochs", defaults.epochs);
    c.learning_rate = j.value("learning_rate", defaults.learning_rate);
    c.batch_size = j.value("batch_size", defaults.batch_size);
    c.seed = j.value("seed", defaults.seed);
    c.recon_loss_scale = j.value("recon_loss_scale", defaults.recon_loss_scale);
    c.deterministic = j.value("deterministic", defaults.deterministic);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"data_n", c.data_n},
         {"data_dims", c.data_dims},
         {"data_seed", c.data_seed},
         {"model", c.model},
         {"stage1_large", c.stage1_large},
         {"stage1_small", c.stage1_small},
         {"stage2", c.stage2},
         {"eval_holdout_fraction", c.eval_holdout_fraction},
         {"eval_split_seed", c.eval_split_seed},
         {"gamma", c.gamma},
         {"binarize_threshold", c.binarize_threshold},
         {"deterministic", c.deterministic},
         {"out_root", c.out_root}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    RunConfig defaults;
    c.data_n = j.value("data_n", defaults.data_n);
    c.data_dims = j.value("data_dims", defaults.data_dims);
    c.data_seed = j.value("data_seed", defaults.data_seed);
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("stage1_large"))
        c.stage1_large = j.at("stage1_large").get<StageConfig>();
    if (j.contains("stage1_small"))
        c.stage1_small = j.at("stage1_small").get<StageConfig>();
    if (j.contains("stage2")) c.stage2 = j.at("stage2").get<StageConfig>();
    // Stage roles are positional in this document; beta is forced to 0 in
    // stage 2 regardless of what the file says.
    c.stage1_large.stage = 1;
    c.stage1_small.stage = 1;
    c.stage2.stage = 2;
    c.stage2.beta = 0.0;
    c.eval_holdout_fraction =
        j.value("eval_holdout_fraction", defaults.eval_holdout_fraction);
    c.eval_split_seed = j.value("eval_split_seed", defaults.eval_split_seed);
    c.gamma = j.value("gamma", defaults.gamma);
    c.binarize_threshold =
        j.value("binarize_threshold", defaults.binarize_threshold);
    c.deterministic = j.value("deterministic", defaults.deterministic);
    c.out_root = j.value("out_root", defaults.out_root);
}

std::uint64_t config_hash(const RunConfig& config) {
    const std::string canon = nlohmann::json(config).dump();
    return fnv1a64(canon.data(), canon.size());
}

std::string config_hash_hex(const RunConfig& config) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    return buf;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_run_config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_run_config: bad JSON in " + path.string() +
                                 ": " + e.what());
    }
    return j.get<RunConfig>();
}

void write_run_config(const RunConfig& config,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("write_run_config: cannot open " + path.string());
    out << nlohmann::json(config).dump(2) << "\n";
}

} // namespace bvae
