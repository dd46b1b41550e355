#include "bvae/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bvae/losses.hpp"

namespace bvae {

void StageConfig::validate() const {
    if (stage != 1 && stage != 2)
        throw std::invalid_argument("StageConfig: stage must be 1 or 2");
    if (epochs < 1 || batch_size < 1)
        throw std::invalid_argument("StageConfig: epochs and batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("StageConfig: learning_rate must be > 0");
    if (beta < 0.0)
        throw std::invalid_argument("StageConfig: beta must be >= 0");
    if (!(recon_loss_scale > 0.0))
        throw std::invalid_argument("StageConfig: recon_loss_scale must be > 0");
}

std::string curve_csv(const TrainingCurve& curve) {
    std::ostringstream os;
    os << "epoch,dice_loss,kld,beta,seconds\n";
    char buf[160];
    for (const EpochRecord& r : curve.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.6f\n", r.epoch,
                      r.dice_loss, r.kld, r.beta, r.seconds);
        os << buf;
    }
    return os.str();
}

std::vector<const VoxelGrid*> flatten_dataset(const TripletDataset& dataset) {
    std::vector<const VoxelGrid*> grids;
    grids.reserve(dataset.triplets.size() * 3);
    for (const SkullTriplet& t : dataset.triplets) {
        grids.push_back(&t.complete);
        grids.push_back(&t.cranial_defect);
        grids.push_back(&t.facial_defect);
    }
    return grids;
}

std::vector<float> draw_epoch_epsilon(std::uint64_t seed, int epoch,
                                      int sample_index, int dim) {
    NormalSampler sampler(mix_seed(seed, 0xe75, static_cast<std::uint64_t>(epoch) << 24 |
                                                     static_cast<std::uint64_t>(sample_index)));
    std::vector<float> eps(static_cast<std::size_t>(dim));
    for (float& e : eps) e = static_cast<float>(sampler.next());
    return eps;
}

namespace {

double kld_from_heads(std::span<const float> mu, std::span<const float> logvar) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double lv = logvar[i];
        const double m = mu[i];
        acc += -0.5 * (1.0 + lv) + 0.5 * std::exp(lv) + 0.5 * m * m;
    }
    return acc;
}

std::vector<int> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 eng(mix_seed(seed, 0x5f5, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = eng() % i;
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

void check_finite(double value, const char* term, int epoch, int sample) {
    if (!std::isfinite(value))
        throw std::runtime_error(std::string("training aborted: non-finite ") +
                                 term + " at epoch " + std::to_string(epoch) +
                                 ", sample " + std::to_string(sample));
}

} // namespace

TrainingCurve train_stage1(Stage1Model& model,
                           const std::vector<const VoxelGrid*>& dataset,
                           const StageConfig& config) {
    config.validate();
    if (config.stage != 1)
        throw std::invalid_argument("train_stage1: config.stage must be 1");
    if (dataset.empty())
        throw std::invalid_argument("train_stage1: dataset is empty");
    const ModelConfig& mc = model.encoder.config();
    for (const VoxelGrid* g : dataset)
        if (g->dims != mc.input_shape)
            throw std::invalid_argument("train_stage1: grid shape mismatch");

    const int d = mc.latent_dim;
    const std::size_t enc_n = model.encoder.param_count();
    const std::size_t dec_n = model.decoder.param_count();
    std::vector<float> grad(enc_n + dec_n, 0.0f);

    auto param_chunks = model.encoder.params();
    for (auto& c : model.decoder.params()) param_chunks.push_back(c);
    nn::Adam adam(enc_n + dec_n, config.learning_rate);

    const double w_recon = config.recon_loss_scale;
    std::vector<double> ddice(dataset.front()->size());
    std::vector<float> g_occ(ddice.size());
    std::vector<float> zf(static_cast<std::size_t>(d));
    std::vector<float> gz(static_cast<std::size_t>(d));
    std::vector<float> gmu(static_cast<std::size_t>(d));
    std::vector<float> glogvar(static_cast<std::size_t>(d));

    TrainingCurve curve;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = epoch_order(dataset.size(), config.seed, epoch);
        double dice_sum = 0.0, kld_sum = 0.0;

        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0f);

            for (std::size_t bi = begin; bi < end; ++bi) {
                const int idx = order[bi];
                const VoxelGrid& target = *dataset[static_cast<std::size_t>(idx)];
                const nn::Volume x = to_volume(target);

                EncoderActs eacts;
                model.encoder.forward(x, eacts);
                const auto eps = draw_epoch_epsilon(config.seed, epoch, idx, d);
                for (int i = 0; i < d; ++i) {
                    const float sigma = std::exp(0.5f * eacts.logvar[static_cast<std::size_t>(i)]);
                    zf[static_cast<std::size_t>(i)] =
                        eacts.mu[static_cast<std::size_t>(i)] + sigma * eps[static_cast<std::size_t>(i)];
                }

                DecoderActs dacts;
                model.decoder.forward(zf, dacts);
                const auto& occ = dacts.post.back().v;

                const double dice = soft_dice_loss(occ, target.values);
                const double kld = kld_from_heads(eacts.mu, eacts.logvar);
                check_finite(dice, "dice loss", epoch, idx);
                check_finite(kld, "kld", epoch, idx);
                dice_sum += dice;
                kld_sum += kld;

                soft_dice_loss_grad(occ, target.values, ddice);
                for (std::size_t i = 0; i < ddice.size(); ++i)
                    g_occ[i] = static_cast<float>(w_recon * ddice[i]);

                model.decoder.backward(zf, dacts, g_occ,
                                       std::span<float>(grad).subspan(enc_n), gz);
                for (int i = 0; i < d; ++i) {
                    const std::size_t ui = static_cast<std::size_t>(i);
                    const float sigma = std::exp(0.5f * eacts.logvar[ui]);
                    gmu[ui] = gz[ui] + static_cast<float>(config.beta) * eacts.mu[ui];
                    glogvar[ui] = 0.5f * gz[ui] * sigma * eps[ui] +
                                  static_cast<float>(config.beta) * 0.5f *
                                      (sigma * sigma - 1.0f);
                }
                model.encoder.backward(x, eacts, gmu, glogvar,
                                       std::span<float>(grad).first(enc_n));
            }

            const float inv_batch = 1.0f / static_cast<float>(end - begin);
            for (float& g : grad) g *= inv_batch;
            adam.step(param_chunks, grad);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.dice_loss = dice_sum / static_cast<double>(dataset.size());
        rec.kld = kld_sum / static_cast<double>(dataset.size());
        rec.beta = config.beta;
        rec.seconds =
            config.deterministic
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
        curve.epochs.push_back(rec);
    }
    return curve;
}

TrainingCurve train_stage2(const Stage1Model& stage1, DecoderNet& decoder,
                           const std::vector<const VoxelGrid*>& dataset,
                           const StageConfig& config) {
    config.validate();
    if (config.stage != 2)
        throw std::invalid_argument("train_stage2: config.stage must be 2");
    if (dataset.empty())
        throw std::invalid_argument("train_stage2: dataset is empty");
    if (decoder.config().latent_dim != stage1.encoder.config().latent_dim ||
        decoder.config().input_shape != stage1.encoder.config().input_shape)
        throw std::invalid_argument("train_stage2: decoder/encoder config mismatch");

    const int d = decoder.config().latent_dim;
    const std::size_t dec_n = decoder.param_count();
    std::vector<float> grad(dec_n, 0.0f);
    auto param_chunks = decoder.params();
    nn::Adam adam(dec_n, config.learning_rate);

    // Posteriors are frozen; encode each sample once.
    std::vector<std::vector<float>> mus, logvars;
    for (const VoxelGrid* g : dataset) {
        EncoderActs eacts;
        stage1.encoder.forward(to_volume(*g), eacts);
        mus.push_back(eacts.mu);
        logvars.push_back(eacts.logvar);
    }

    const double w_recon = config.recon_loss_scale;
    std::vector<double> ddice(dataset.front()->size());
    std::vector<float> g_occ(ddice.size());
    std::vector<float> zf(static_cast<std::size_t>(d));

    TrainingCurve curve;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = epoch_order(dataset.size(), config.seed, epoch);
        double dice_sum = 0.0, kld_sum = 0.0;

        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0f);

            for (std::size_t bi = begin; bi < end; ++bi) {
                const int idx = order[bi];
                const std::size_t uidx = static_cast<std::size_t>(idx);
                const VoxelGrid& target = *dataset[uidx];

                // Fresh draw per sample per epoch: the decoder sees varying
                // inputs for the same target (many-to-one mapping).
                const auto eps = draw_epoch_epsilon(config.seed, epoch, idx, d);
                for (int i = 0; i < d; ++i) {
                    const std::size_t ui = static_cast<std::size_t>(i);
                    const float sigma = std::exp(0.5f * logvars[uidx][ui]);
                    zf[ui] = mus[uidx][ui] + sigma * eps[ui];
                }

                DecoderActs dacts;
                decoder.forward(zf, dacts);
                const auto& occ = dacts.post.back().v;

                const double dice = soft_dice_loss(occ, target.values);
                check_finite(dice, "dice loss", epoch, idx);
                dice_sum += dice;
                kld_sum += kld_from_heads(mus[uidx], logvars[uidx]);

                soft_dice_loss_grad(occ, target.values, ddice);
                for (std::size_t i = 0; i < ddice.size(); ++i)
                    g_occ[i] = static_cast<float>(w_recon * ddice[i]);
                decoder.backward(zf, dacts, g_occ, grad, {});
            }

            const float inv_batch = 1.0f / static_cast<float>(end - begin);
            for (float& g : grad) g *= inv_batch;
            adam.step(param_chunks, grad);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.dice_loss = dice_sum / static_cast<double>(dataset.size());
        rec.kld = kld_sum / static_cast<double>(dataset.size());
        rec.beta = 0.0;
        rec.seconds =
            config.deterministic
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
        curve.epochs.push_back(rec);
    }
    return curve;
}

AggregatedModel aggregate(const Stage1Model& stage1,
                          const DecoderNet& stage2_decoder) {
    if (stage2_decoder.config().latent_dim != stage1.encoder.config().latent_dim)
        throw std::invalid_argument("aggregate: latent dims differ");
    if (stage2_decoder.config().input_shape != stage1.encoder.config().input_shape)
        throw std::invalid_argument("aggregate: input shapes differ");
    AggregatedModel out{stage1.encoder, stage2_decoder, "", ""};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(params_hash(
                      const_cast<const EncoderNet&>(stage1.encoder).params())));
    out.stage1_id = buf;
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      params_hash(stage2_decoder.params())));
    out.stage2_id = buf;
    return out;
}

VoxelGrid reconstruct(const EncoderNet& encoder, const DecoderNet& decoder,
                      const VoxelGrid& x) {
    const EncoderOutput enc = encode(encoder, x);
    LatentCode z{enc.posterior.mu};
    return decode(decoder, z).occupancy_grid;
}

VoxelGrid reconstruct_sampled(const EncoderNet& encoder,
                              const DecoderNet& decoder, const VoxelGrid& x,
                              std::uint64_t seed) {
    const EncoderOutput enc = encode(encoder, x);
    NormalSampler sampler(mix_seed(seed, 0x7ec0));
    std::vector<double> eps(enc.posterior.mu.size());
    for (double& e : eps) e = sampler.next();
    return decode(decoder, reparameterize(enc.posterior, eps)).occupancy_grid;
}

} // namespace bvae
