#include "bvae/checkpoint.hpp"

#include <fstream>

#include "bvae/voxel.hpp"

namespace bvae {

namespace {
constexpr int kCheckpointVersion = 1;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"input_shape", c.input_shape},
         {"latent_dim", c.latent_dim},
         {"num_layers", c.num_layers},
         {"base_channels", c.base_channels},
         {"seed", c.seed},
         {"kernel", 4},
         {"stride", 2},
         {"hidden_activation", "leaky_relu_0.1"},
         {"output_activation", "sigmoid"},
         {"mu_head_init_gain", 30.0},
         {"logvar_head_init_gain", 6.0},
         {"output_bias_init", -2.0}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.input_shape = j.at("input_shape").get<std::array<int, 3>>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

const std::vector<float>& Checkpoint::section(const std::string& name) const {
    for (const auto& [n, blob] : sections)
        if (n == name) return blob;
    throw std::invalid_argument("checkpoint has no section '" + name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::vector<float> blob;
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& [name, data] : ckpt.sections) {
        layout.push_back({{"name", name}, {"count", data.size()}});
        blob.insert(blob.end(), data.begin(), data.end());
    }

    std::ofstream bin(path.string() + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin)
        throw std::runtime_error("save_checkpoint: cannot open " + path.string() + ".bin");
    bin.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    bin.close();
    if (!bin) throw std::runtime_error("save_checkpoint: write failed");

    nlohmann::json j;
    j["format"] = "bvae-checkpoint";
    j["version"] = kCheckpointVersion;
    j["stage_tag"] = ckpt.stage_tag;
    j["epoch"] = ckpt.epoch;
    j["seed"] = ckpt.seed;
    j["beta"] = ckpt.beta;
    j["config"] = ckpt.config;
    j["sections"] = layout;
    j["blob_checksum_fnv1a64"] =
        fnv1a64(blob.data(), blob.size() * sizeof(float));
    if (!ckpt.extra.is_null()) j["extra"] = ckpt.extra;

    std::ofstream meta(path.string() + ".json", std::ios::trunc);
    if (!meta)
        throw std::runtime_error("save_checkpoint: cannot open " + path.string() + ".json");
    meta << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream meta(path.string() + ".json");
    if (!meta)
        throw CorruptFileError("load_checkpoint: missing manifest " +
                               path.string() + ".json");
    nlohmann::json j;
    try {
        meta >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("load_checkpoint: bad manifest: " + std::string(e.what()));
    }
    if (j.value("format", "") != "bvae-checkpoint")
        throw UnsupportedFormatError("load_checkpoint: not a checkpoint manifest");
    if (j.value("version", -1) != kCheckpointVersion)
        throw UnsupportedFormatError("load_checkpoint: unsupported version " +
                                     std::to_string(j.value("version", -1)));

    Checkpoint ckpt;
    ckpt.version = j["version"].get<int>();
    ckpt.stage_tag = j.value("stage_tag", "");
    ckpt.epoch = j.value("epoch", 0);
    ckpt.seed = j.value("seed", std::uint64_t{0});
    ckpt.beta = j.value("beta", 0.0);
    ckpt.config = j.at("config").get<ModelConfig>();
    if (j.contains("extra")) ckpt.extra = j["extra"];

    std::size_t total = 0;
    for (const auto& s : j.at("sections"))
        total += s.at("count").get<std::size_t>();

    std::ifstream bin(path.string() + ".bin", std::ios::binary);
    if (!bin)
        throw CorruptFileError("load_checkpoint: missing blob " + path.string() + ".bin");
    std::vector<float> blob(total);
    bin.read(reinterpret_cast<char*>(blob.data()),
             static_cast<std::streamsize>(total * sizeof(float)));
    if (static_cast<std::size_t>(bin.gcount()) != total * sizeof(float) ||
        bin.peek() != std::char_traits<char>::eof())
        throw CorruptFileError("load_checkpoint: blob size mismatch in " +
                               path.string() + ".bin");
    const auto checksum = j.at("blob_checksum_fnv1a64").get<std::uint64_t>();
    if (fnv1a64(blob.data(), blob.size() * sizeof(float)) != checksum)
        throw CorruptFileError("load_checkpoint: checksum mismatch in " +
                               path.string() + ".bin");

    std::size_t off = 0;
    for (const auto& s : j.at("sections")) {
        const auto count = s.at("count").get<std::size_t>();
        ckpt.sections.emplace_back(
            s.at("name").get<std::string>(),
            std::vector<float>(blob.begin() + off, blob.begin() + off + count));
        off += count;
    }
    return ckpt;
}

} // namespace bvae
