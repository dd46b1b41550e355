#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bvae/data.hpp"
#include "bvae/networks.hpp"
#include "bvae/rng.hpp"

namespace bvae {

struct StageConfig {
    int stage = 1;            // 1: joint VAE, 2: decoupled decoder
    double beta = 100.0;      // ignored (forced 0) in stage 2
    int epochs = 1;
    double learning_rate = 1e-3;
    int batch_size = 8;
    std::uint64_t seed = 0;
    // Weight on the Dice term of the training objective
    // (objective = recon_loss_scale * dice + beta * kld). The recorded curves
    // always carry the unscaled mean Dice loss.
    double recon_loss_scale = 1000.0;
    bool deterministic = true; // zeroes wall-clock fields for bitwise reruns

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double dice_loss = 0.0; // mean over samples, unscaled, in [0,1]
    double kld = 0.0;       // mean over samples, nats
    double beta = 0.0;
    double seconds = 0.0;
};

struct TrainingCurve {
    std::vector<EpochRecord> epochs;
};

// CSV columns: epoch,dice_loss,kld,beta,seconds
std::string curve_csv(const TrainingCurve& curve);

// Encoder+heads and decoder trained jointly in stage 1.
struct Stage1Model {
    EncoderNet encoder;
    DecoderNet decoder;

    explicit Stage1Model(const ModelConfig& config)
        : encoder(config), decoder(config, mix_seed(config.seed, 0xdec1)) {}
};

struct AggregatedModel {
    EncoderNet encoder; // stage-1 posterior, frozen
    DecoderNet decoder; // stage-2 decoupled decoder
    std::string stage1_id;
    std::string stage2_id;
};

// All 3N grids of a triplet dataset in a fixed order (per subject:
// complete, cranial, facial); each grid is its own reconstruction target.
std::vector<const VoxelGrid*> flatten_dataset(const TripletDataset& dataset);

// Joint training on the beta-weighted objective. Aborts with a diagnostic
// std::runtime_error if the loss turns non-finite.
TrainingCurve train_stage1(Stage1Model& model,
                           const std::vector<const VoxelGrid*>& dataset,
                           const StageConfig& config);

// Stage 2: frozen stage-1 posterior feeds a decoupled decoder trained on the
// reconstruction term only. A fresh epsilon is drawn per sample per epoch.
// stage1 is const; its parameters are bitwise unchanged afterwards.
TrainingCurve train_stage2(const Stage1Model& stage1, DecoderNet& decoder,
                           const std::vector<const VoxelGrid*>& dataset,
                           const StageConfig& config);

// Composition of Eq.-style z ~ q(z|x), x ~ p(x|z): stage-1 encoder with the
// stage-2 decoder. Refuses mismatched latent dims / input shapes.
AggregatedModel aggregate(const Stage1Model& stage1,
                          const DecoderNet& stage2_decoder);

// Deterministic reconstruction: decode(mu(x)). The sampled variant draws
// z = mu + sigma .* eps with the given seed.
VoxelGrid reconstruct(const EncoderNet& encoder, const DecoderNet& decoder,
                      const VoxelGrid& x);
VoxelGrid reconstruct_sampled(const EncoderNet& encoder,
                              const DecoderNet& decoder, const VoxelGrid& x,
                              std::uint64_t seed);

// Epsilon stream used by stage-2 resampling; exposed for tests.
std::vector<float> draw_epoch_epsilon(std::uint64_t seed, int epoch,
                                      int sample_index, int dim);

} // namespace bvae
