#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bvae/data.hpp"
#include "bvae/training.hpp"

using namespace bvae;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.input_shape = {16, 16, 16};
    cfg.latent_dim = 6;
    cfg.num_layers = 2;
    cfg.base_channels = 4;
    cfg.seed = seed;
    return cfg;
}

TripletDataset tiny_dataset(int n = 3, std::uint64_t seed = 5) {
    return generate_synthetic_triplets(n, {16, 16, 16}, seed);
}

StageConfig stage1_config(double beta, int epochs) {
    StageConfig sc;
    sc.stage = 1;
    sc.beta = beta;
    sc.epochs = epochs;
    sc.batch_size = 4;
    sc.seed = 21;
    return sc;
}

} // namespace

TEST_CASE("single-sample single-epoch smoke run") {
    const auto ds = tiny_dataset(1);
    const std::vector<const VoxelGrid*> grids{&ds.triplets[0].complete};
    Stage1Model model(tiny_config(2));
    const auto curve = train_stage1(model, grids, stage1_config(100.0, 1));
    REQUIRE(curve.epochs.size() == 1);
    CHECK(curve.epochs[0].epoch == 0);
    CHECK(std::isfinite(curve.epochs[0].dice_loss));
    CHECK(std::isfinite(curve.epochs[0].kld));
    CHECK(curve.epochs[0].beta == 100.0);
    CHECK(curve.epochs[0].seconds == 0.0); // deterministic mode
}

TEST_CASE("config and dataset validation") {
    const auto ds = tiny_dataset(1);
    const auto grids = flatten_dataset(ds);
    Stage1Model model(tiny_config(3));
    StageConfig sc = stage1_config(100.0, 1);

    sc.stage = 2;
    CHECK_THROWS_AS(train_stage1(model, grids, sc), std::invalid_argument);
    sc = stage1_config(100.0, 0);
    CHECK_THROWS_AS(train_stage1(model, grids, sc), std::invalid_argument);
    sc = stage1_config(-1.0, 1);
    CHECK_THROWS_AS(train_stage1(model, grids, sc), std::invalid_argument);
    CHECK_THROWS_AS(train_stage1(model, {}, stage1_config(1.0, 1)),
                    std::invalid_argument);
}

TEST_CASE("training is bitwise reproducible per seed") {
    const auto ds = tiny_dataset(2);
    const auto grids = flatten_dataset(ds);

    Stage1Model a(tiny_config(7));
    Stage1Model b(tiny_config(7));
    const auto ca = train_stage1(a, grids, stage1_config(0.0001, 2));
    const auto cb = train_stage1(b, grids, stage1_config(0.0001, 2));
    CHECK(curve_csv(ca) == curve_csv(cb));
    CHECK(params_hash(a.encoder.params()) == params_hash(b.encoder.params()));
    CHECK(params_hash(a.decoder.params()) == params_hash(b.decoder.params()));

    Stage1Model c(tiny_config(7));
    StageConfig other = stage1_config(0.0001, 2);
    other.seed = 22;
    const auto cc = train_stage1(c, grids, other);
    CHECK(curve_csv(ca) != curve_csv(cc));
}

TEST_CASE("curve CSV layout") {
    TrainingCurve curve;
    curve.epochs.push_back({0, 0.5, 1.25, 100.0, 0.0});
    curve.epochs.push_back({1, 0.25, 0.5, 100.0, 0.0});
    const std::string csv = curve_csv(curve);
    CHECK(csv.rfind("epoch,dice_loss,kld,beta,seconds\n", 0) == 0);
    CHECK(csv.find("\n0,0.5,1.25,100,0.000000\n") != std::string::npos);
    int lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 3);
}

TEST_CASE("stage 2 freezes stage-1 parameters and resamples inputs") {
    const auto ds = tiny_dataset(2);
    const auto grids = flatten_dataset(ds);
    Stage1Model stage1(tiny_config(9));
    train_stage1(stage1, grids, stage1_config(100.0, 2));

    const auto enc_hash_before = params_hash(stage1.encoder.params());
    const auto dec_hash_before = params_hash(stage1.decoder.params());

    DecoderNet dec2 = clone_decoder_architecture(tiny_config(9), 1234);
    const auto init_blob = snapshot_params(dec2.params());

    StageConfig s2;
    s2.stage = 2;
    s2.epochs = 2;
    s2.batch_size = 4;
    s2.seed = 33;
    const auto curve = train_stage2(stage1, dec2, grids, s2);
    CHECK(curve.epochs.size() == 2);
    CHECK(curve.epochs[0].beta == 0.0);

    CHECK(params_hash(stage1.encoder.params()) == enc_hash_before);
    CHECK(params_hash(stage1.decoder.params()) == dec_hash_before);
    CHECK(snapshot_params(dec2.params()) != init_blob);
}

TEST_CASE("stage-2 epsilon draws differ across epochs") {
    const auto e0 = draw_epoch_epsilon(5, 0, 3, 8);
    const auto e1 = draw_epoch_epsilon(5, 1, 3, 8);
    const auto e0b = draw_epoch_epsilon(5, 0, 3, 8);
    CHECK(e0 == e0b);
    CHECK(e0 != e1);
    CHECK(draw_epoch_epsilon(5, 0, 4, 8) != e0);
}

TEST_CASE("aggregate contract") {
    const ModelConfig cfg = tiny_config(12);
    Stage1Model stage1(cfg);
    const DecoderNet dec2 = clone_decoder_architecture(cfg, 55);
    const auto agg = aggregate(stage1, dec2);
    CHECK(agg.stage1_id.size() == 16);
    CHECK(agg.stage2_id.size() == 16);
    CHECK(agg.stage1_id != agg.stage2_id);

    ModelConfig other = cfg;
    other.latent_dim = 4;
    const DecoderNet wrong_d(other, 56);
    CHECK_THROWS_AS(aggregate(stage1, wrong_d), std::invalid_argument);
}

TEST_CASE("deterministic reconstruction is a pure function of the input") {
    const ModelConfig cfg = tiny_config(13);
    Stage1Model stage1(cfg);
    const auto ds = tiny_dataset(2, 77);
    const VoxelGrid& x = ds.triplets[0].complete;

    const VoxelGrid r1 = reconstruct(stage1.encoder, stage1.decoder, x);
    const VoxelGrid r2 = reconstruct(stage1.encoder, stage1.decoder, x);
    CHECK(r1.values == r2.values);

    const VoxelGrid s1 = reconstruct_sampled(stage1.encoder, stage1.decoder, x, 1);
    const VoxelGrid s2 = reconstruct_sampled(stage1.encoder, stage1.decoder, x, 2);
    const VoxelGrid s1b = reconstruct_sampled(stage1.encoder, stage1.decoder, x, 1);
    CHECK(s1.values == s1b.values);
    CHECK(s1.values != s2.values);
}
