#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bvae/checkpoint.hpp"
#include "bvae/losses.hpp"
#include "bvae/networks.hpp"
#include "bvae/rng.hpp"

using namespace bvae;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.input_shape = {16, 16, 16};
    cfg.latent_dim = 8;
    cfg.num_layers = 2;
    cfg.base_channels = 4;
    cfg.seed = seed;
    return cfg;
}

VoxelGrid random_grid(std::array<int, 3> dims, std::uint64_t seed) {
    VoxelGrid g(dims[0], dims[1], dims[2]);
    std::mt19937_64 eng(seed);
    for (float& v : g.values) v = eng() & 1 ? 1.0f : 0.0f;
    return g;
}

} // namespace

TEST_CASE("config validation") {
    ModelConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.input_shape = {18, 16, 16}; // 18 % 4 != 0
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.num_layers = 5; // 16 < 2^5
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    ModelConfig paper;
    CHECK(paper.latent_dim == 32); // paper default
    CHECK_NOTHROW(paper.validate());
}

TEST_CASE("encode is deterministic, finite, and shape-checked") {
    const ModelConfig cfg = tiny_config(3);
    const EncoderNet enc(cfg);
    const VoxelGrid x = random_grid(cfg.input_shape, 4);

    const EncoderOutput a = encode(enc, x);
    const EncoderOutput b = encode(enc, x);
    CHECK(a.posterior.dim() == cfg.latent_dim);
    CHECK(a.posterior.mu == b.posterior.mu);
    CHECK(a.posterior.log_variance == b.posterior.log_variance);

    const VoxelGrid zeros(16, 16, 16);
    const EncoderOutput z = encode(enc, zeros);
    for (double m : z.posterior.mu) CHECK(std::isfinite(m));
    for (double lv : z.posterior.log_variance) CHECK(std::isfinite(lv));

    CHECK_THROWS_AS(encode(enc, VoxelGrid(8, 8, 8)), std::invalid_argument);
}

TEST_CASE("default config emits 32-dimensional posteriors") {
    ModelConfig cfg; // paper latent default, toy 32^3 4-layer
    cfg.seed = 9;
    const EncoderNet enc(cfg);
    const auto out = encode(enc, random_grid(cfg.input_shape, 10));
    CHECK(out.posterior.dim() == 32);
}

TEST_CASE("decode shape, determinism, and range") {
    const ModelConfig cfg = tiny_config(5);
    const DecoderNet dec(cfg, 77);
    LatentCode z;
    z.z.assign(static_cast<std::size_t>(cfg.latent_dim), 0.3);
    const DecoderOutput a = decode(dec, z);
    const DecoderOutput b = decode(dec, z);
    CHECK(a.occupancy_grid.dims == cfg.input_shape);
    CHECK(a.logits_grid.dims == cfg.input_shape);
    CHECK(a.occupancy_grid.values == b.occupancy_grid.values);
    for (float v : a.occupancy_grid.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    LatentCode bad;
    bad.z.assign(3, 0.0);
    CHECK_THROWS_AS(decode(dec, bad), std::invalid_argument);
}

TEST_CASE("posterior-mean round trip keeps the input shape") {
    for (int layers : {2, 3}) {
        ModelConfig cfg = tiny_config(6);
        cfg.input_shape = {16, 32, 16};
        cfg.num_layers = layers;
        const EncoderNet enc(cfg);
        const DecoderNet dec(cfg, 8);
        const VoxelGrid x = random_grid(cfg.input_shape, 7);
        const auto posterior = encode(enc, x).posterior;
        const auto out = decode(dec, LatentCode{posterior.mu});
        CHECK(out.occupancy_grid.dims == x.dims);
    }
}

TEST_CASE("six-layer configuration runs at 64^3") {
    ModelConfig cfg;
    cfg.input_shape = {64, 64, 64};
    cfg.num_layers = 6;
    cfg.base_channels = 2;
    cfg.latent_dim = 32;
    cfg.seed = 11;
    const EncoderNet enc(cfg);
    const DecoderNet dec(cfg, 12);
    const auto posterior = encode(enc, random_grid(cfg.input_shape, 13)).posterior;
    CHECK(posterior.dim() == 32);
    const auto out = decode(dec, LatentCode{posterior.mu});
    CHECK(out.occupancy_grid.dims == cfg.input_shape);
}

TEST_CASE("decoder clone: equal architecture, independent storage") {
    const ModelConfig cfg = tiny_config(20);
    const DecoderNet original(cfg, 100);
    DecoderNet clone = clone_decoder_architecture(cfg, 101);
    CHECK(clone.param_count() == original.param_count());

    const auto blob_a = snapshot_params(original.params());
    const auto blob_b = snapshot_params(clone.params());
    CHECK(blob_a != blob_b); // different seeds, different init

    LatentCode z;
    z.z.assign(static_cast<std::size_t>(cfg.latent_dim), -0.2);
    const auto before = decode(original, z).occupancy_grid;

    // Mutating the clone must not touch the original.
    auto chunks = clone.params();
    for (auto& c : chunks)
        for (float& v : c) v += 1.0f;
    const auto after = decode(original, z).occupancy_grid;
    CHECK(before.values == after.values);

    const DecoderNet clone_same = clone_decoder_architecture(cfg, 100);
    CHECK(snapshot_params(clone_same.params()) == blob_a);
}

TEST_CASE("reconstruction loss responds to the latent code") {
    const ModelConfig cfg = tiny_config(30);
    const DecoderNet dec(cfg, 31);
    const VoxelGrid target = random_grid(cfg.input_shape, 32);

    std::vector<double> z(static_cast<std::size_t>(cfg.latent_dim), 0.1);
    const double base = soft_dice_loss(decode(dec, LatentCode{z}).occupancy_grid, target);
    double max_fd = 0.0;
    for (int i = 0; i < cfg.latent_dim; ++i) {
        auto zp = z;
        zp[static_cast<std::size_t>(i)] += 1e-3;
        const double plus =
            soft_dice_loss(decode(dec, LatentCode{zp}).occupancy_grid, target);
        max_fd = std::max(max_fd, std::abs(plus - base) / 1e-3);
    }
    CHECK(max_fd > 0.0);
}

TEST_CASE("parameter snapshot/restore round trip") {
    const ModelConfig cfg = tiny_config(40);
    EncoderNet enc(cfg);
    const auto blob = snapshot_params(const_cast<const EncoderNet&>(enc).params());
    CHECK(blob.size() == enc.param_count());

    EncoderNet other(tiny_config(41));
    restore_params(other.params(), blob);
    CHECK(snapshot_params(const_cast<const EncoderNet&>(other).params()) == blob);
    CHECK(params_hash(const_cast<const EncoderNet&>(other).params()) ==
          params_hash(const_cast<const EncoderNet&>(enc).params()));

    std::vector<float> short_blob(blob.begin(), blob.end() - 1);
    CHECK_THROWS_AS(restore_params(other.params(), short_blob),
                    std::invalid_argument);
}

TEST_CASE("checkpoint save/load round trip and rejection paths") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "bvae_test_ckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const ModelConfig cfg = tiny_config(50);
    const EncoderNet enc(cfg);
    const DecoderNet dec(cfg, 51);

    Checkpoint ckpt;
    ckpt.stage_tag = "stage1_beta100";
    ckpt.epoch = 12;
    ckpt.seed = 7;
    ckpt.beta = 100.0;
    ckpt.config = cfg;
    ckpt.extra = {{"note", "unit test"}};
    ckpt.sections.emplace_back("encoder",
                               snapshot_params(const_cast<const EncoderNet&>(enc).params()));
    ckpt.sections.emplace_back("decoder", snapshot_params(dec.params()));
    save_checkpoint(ckpt, dir / "model");

    const Checkpoint loaded = load_checkpoint(dir / "model");
    CHECK(loaded.stage_tag == "stage1_beta100");
    CHECK(loaded.epoch == 12);
    CHECK(loaded.beta == 100.0);
    CHECK(loaded.config == cfg);
    CHECK(loaded.section("encoder") == ckpt.section("encoder"));
    CHECK(loaded.section("decoder") == ckpt.section("decoder"));
    CHECK_THROWS_AS(loaded.section("missing"), std::invalid_argument);

    SUBCASE("truncated blob rejected") {
        fs::resize_file(dir / "model.bin", 64);
        CHECK_THROWS_AS(load_checkpoint(dir / "model"), CorruptFileError);
    }
    SUBCASE("corrupted payload fails the checksum") {
        std::fstream f(dir / "model.bin",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(16);
        f.put('\x55');
        f.close();
        CHECK_THROWS_AS(load_checkpoint(dir / "model"), CorruptFileError);
    }
    SUBCASE("unknown version rejected") {
        std::ifstream in(dir / "model.json");
        nlohmann::json j;
        in >> j;
        in.close();
        j["version"] = 999;
        std::ofstream out(dir / "model.json", std::ios::trunc);
        out << j.dump(2);
        out.close();
        CHECK_THROWS_AS(load_checkpoint(dir / "model"), UnsupportedFormatError);
    }
}
