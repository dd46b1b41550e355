#include "bvae/networks.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "bvae/rng.hpp"

namespace bvae {

void ModelConfig::validate() const {
    if (latent_dim < 1 || num_layers < 1 || base_channels < 1)
        throw std::invalid_argument("ModelConfig: fields must be positive");
    const int div = 1 << num_layers;
    for (int d : input_shape) {
        if (d < div || d % div != 0)
            throw std::invalid_argument(
                "ModelConfig: input dims must be divisible by 2^num_layers");
    }
}

std::array<int, 3> ModelConfig::bottleneck_shape() const {
    const int div = 1 << num_layers;
    return {input_shape[0] / div, input_shape[1] / div, input_shape[2] / div};
}

int ModelConfig::flat_dim() const {
    const auto s = bottleneck_shape();
    return encoder_out_channels() * s[0] * s[1] * s[2];
}

namespace {

// Head init gains: an untrained encoder should emit a posterior far from
// N(0,I) (large mu spread, wild log-variances), as a randomly initialized
// network does at realistic scale. Recorded in the checkpoint manifest.
constexpr float kMuHeadGain = 30.0f;
constexpr float kLogvarHeadGain = 6.0f;
// Output bias prior: decoded occupancy starts near the sparse-target rate.
constexpr float kOutputBiasInit = -2.0f;

void scale_weights(nn::Linear& layer, float gain) {
    for (float& w : layer.w) w *= gain;
}

std::vector<std::span<float>> grad_chunks(std::span<float> grad,
                                          const std::vector<std::size_t>& sizes) {
    std::vector<std::span<float>> out;
    std::size_t off = 0;
    for (std::size_t s : sizes) {
        out.push_back(grad.subspan(off, s));
        off += s;
    }
    if (off != grad.size())
        throw std::invalid_argument("gradient span has wrong size");
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// EncoderNet

EncoderNet::EncoderNet(const ModelConfig& config)
    : config_(config),
      mu_head_(1, 1),
      logvar_head_(1, 1) {
    config_.validate();
    for (int i = 0; i < config_.num_layers; ++i) {
        const int in_ch = i == 0 ? 1 : config_.base_channels << (i - 1);
        const int out_ch = config_.base_channels << i;
        convs_.emplace_back(in_ch, out_ch);
        convs_.back().init_params(mix_seed(config_.seed, 0xe0c0, static_cast<std::uint64_t>(i)));
    }
    mu_head_ = nn::Linear(config_.flat_dim(), config_.latent_dim);
    mu_head_.init_params(mix_seed(config_.seed, 0xe0c0, 100));
    scale_weights(mu_head_, kMuHeadGain);
    logvar_head_ = nn::Linear(config_.flat_dim(), config_.latent_dim);
    logvar_head_.init_params(mix_seed(config_.seed, 0xe0c0, 101));
    scale_weights(logvar_head_, kLogvarHeadGain);
    n_params_ = 0;
    for (const auto& c : convs_) n_params_ += c.param_count();
    n_params_ += mu_head_.param_count() + logvar_head_.param_count();
}

std::vector<std::span<float>> EncoderNet::params() {
    std::vector<std::span<float>> out;
    for (auto& c : convs_) {
        out.emplace_back(c.w);
        out.emplace_back(c.b);
    }
    out.emplace_back(mu_head_.w);
    out.emplace_back(mu_head_.b);
    out.emplace_back(logvar_head_.w);
    out.emplace_back(logvar_head_.b);
    return out;
}

std::vector<std::span<const float>> EncoderNet::params() const {
    std::vector<std::span<const float>> out;
    for (const auto& c : convs_) {
        out.emplace_back(c.w);
        out.emplace_back(c.b);
    }
    out.emplace_back(mu_head_.w);
    out.emplace_back(mu_head_.b);
    out.emplace_back(logvar_head_.w);
    out.emplace_back(logvar_head_.b);
    return out;
}

void EncoderNet::forward(const nn::Volume& x, EncoderActs& acts) const {
    if (x.c != 1 || x.d != config_.input_shape[0] ||
        x.h != config_.input_shape[1] || x.w != config_.input_shape[2])
        throw std::invalid_argument("EncoderNet: input shape mismatch");
    const std::size_t n_layers = convs_.size();
    acts.pre.resize(n_layers);
    acts.post.resize(n_layers);
    const nn::Volume* cur = &x;
    for (std::size_t i = 0; i < n_layers; ++i) {
        acts.pre[i] = convs_[i].forward(*cur);
        acts.post[i] = acts.pre[i];
        nn::leaky_relu(acts.pre[i].v, acts.post[i].v, kLeakySlope);
        cur = &acts.post[i];
    }
    acts.mu.resize(static_cast<std::size_t>(config_.latent_dim));
    acts.logvar.resize(static_cast<std::size_t>(config_.latent_dim));
    mu_head_.forward(acts.post.back().v, acts.mu);
    logvar_head_.forward(acts.post.back().v, acts.logvar);
}

void EncoderNet::backward(const nn::Volume& x, const EncoderActs& acts,
                          std::span<const float> gmu,
                          std::span<const float> glogvar,
                          std::span<float> grad) const {
    std::vector<std::size_t> sizes;
    for (const auto& c : convs_) {
        sizes.push_back(c.w.size());
        sizes.push_back(c.b.size());
    }
    sizes.push_back(mu_head_.w.size());
    sizes.push_back(mu_head_.b.size());
    sizes.push_back(logvar_head_.w.size());
    sizes.push_back(logvar_head_.b.size());
    auto chunks = grad_chunks(grad, sizes);
    const std::size_t head_base = 2 * convs_.size();

    // Heads share the flattened input; their input-gradients add.
    std::vector<float> gflat(acts.post.back().size(), 0.0f);
    std::vector<float> gflat2(acts.post.back().size(), 0.0f);
    mu_head_.backward(acts.post.back().v, gmu, gflat, chunks[head_base],
                      chunks[head_base + 1]);
    logvar_head_.backward(acts.post.back().v, glogvar, gflat2,
                          chunks[head_base + 2], chunks[head_base + 3]);
    for (std::size_t i = 0; i < gflat.size(); ++i) gflat[i] += gflat2[i];

    nn::Volume gpost = acts.post.back();
    gpost.v = std::move(gflat);
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        nn::Volume gpre = acts.pre[static_cast<std::size_t>(i)];
        nn::leaky_relu_grad(acts.pre[static_cast<std::size_t>(i)].v, gpost.v,
                            gpre.v, kLeakySlope);
        const nn::Volume& input =
            i == 0 ? x : acts.post[static_cast<std::size_t>(i - 1)];
        nn::Volume gx;
        convs_[static_cast<std::size_t>(i)].backward(
            input, gpre, i == 0 ? nullptr : &gx,
            chunks[static_cast<std::size_t>(2 * i)],
            chunks[static_cast<std::size_t>(2 * i + 1)]);
        gpost = std::move(gx);
    }
}

// ---------------------------------------------------------------------------
// DecoderNet

DecoderNet::DecoderNet(const ModelConfig& config, std::uint64_t seed)
    : config_(config), fc_(1, 1), init_seed_(seed) {
    config_.validate();
    fc_ = nn::Linear(config_.latent_dim, config_.flat_dim());
    fc_.init_params(mix_seed(seed, 0xdec0, 100));
    for (int i = 0; i < config_.num_layers; ++i) {
        const int in_ch = config_.base_channels << (config_.num_layers - 1 - i);
        const int out_ch =
            i == config_.num_layers - 1 ? 1 : config_.base_channels << (config_.num_layers - 2 - i);
        deconvs_.emplace_back(in_ch, out_ch);
        deconvs_.back().init_params(mix_seed(seed, 0xdec0, static_cast<std::uint64_t>(i)));
    }
    std::fill(deconvs_.back().b.begin(), deconvs_.back().b.end(), kOutputBiasInit);
    n_params_ = fc_.param_count();
    for (const auto& c : deconvs_) n_params_ += c.param_count();
}

std::vector<std::span<float>> DecoderNet::params() {
    std::vector<std::span<float>> out;
    out.emplace_back(fc_.w);
    out.emplace_back(fc_.b);
    for (auto& c : deconvs_) {
        out.emplace_back(c.w);
        out.emplace_back(c.b);
    }
    return out;
}

std::vector<std::span<const float>> DecoderNet::params() const {
    std::vector<std::span<const float>> out;
    out.emplace_back(fc_.w);
    out.emplace_back(fc_.b);
    for (const auto& c : deconvs_) {
        out.emplace_back(c.w);
        out.emplace_back(c.b);
    }
    return out;
}

void DecoderNet::forward(std::span<const float> z, DecoderActs& acts) const {
    if (z.size() != static_cast<std::size_t>(config_.latent_dim))
        throw std::invalid_argument("DecoderNet: latent length mismatch");
    acts.fc_pre.resize(static_cast<std::size_t>(config_.flat_dim()));
    acts.fc_post.resize(acts.fc_pre.size());
    fc_.forward(z, acts.fc_pre);
    nn::leaky_relu(acts.fc_pre, acts.fc_post, kLeakySlope);

    const auto bshape = config_.bottleneck_shape();
    nn::Volume cur(config_.encoder_out_channels(), bshape[0], bshape[1], bshape[2]);
    cur.v.assign(acts.fc_post.begin(), acts.fc_post.end());

    const std::size_t n_layers = deconvs_.size();
    acts.pre.resize(n_layers);
    acts.post.resize(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
        acts.pre[i] = deconvs_[i].forward(i == 0 ? cur : acts.post[i - 1]);
        acts.post[i] = acts.pre[i];
        if (i + 1 < n_layers)
            nn::leaky_relu(acts.pre[i].v, acts.post[i].v, kLeakySlope);
        else
            nn::sigmoid(acts.pre[i].v, acts.post[i].v);
    }
}

void DecoderNet::backward(std::span<const float> z, const DecoderActs& acts,
                          std::span<const float> g_occupancy,
                          std::span<float> grad, std::span<float> gz) const {
    std::vector<std::size_t> sizes{fc_.w.size(), fc_.b.size()};
    for (const auto& c : deconvs_) {
        sizes.push_back(c.w.size());
        sizes.push_back(c.b.size());
    }
    auto chunks = grad_chunks(grad, sizes);

    const std::size_t last = deconvs_.size() - 1;
    nn::Volume gpre = acts.pre[last];
    nn::sigmoid_grad_from_output(acts.post[last].v, g_occupancy, gpre.v);

    const auto bshape = config_.bottleneck_shape();
    nn::Volume bottleneck(config_.encoder_out_channels(), bshape[0], bshape[1],
                          bshape[2]);
    bottleneck.v.assign(acts.fc_post.begin(), acts.fc_post.end());

    nn::Volume gcur;
    for (int i = static_cast<int>(last); i >= 0; --i) {
        const nn::Volume& input =
            i == 0 ? bottleneck : acts.post[static_cast<std::size_t>(i - 1)];
        nn::Volume gx;
        deconvs_[static_cast<std::size_t>(i)].backward(
            input, gpre, &gx, chunks[static_cast<std::size_t>(2 + 2 * i)],
            chunks[static_cast<std::size_t>(3 + 2 * i)]);
        if (i > 0) {
            gpre = acts.pre[static_cast<std::size_t>(i - 1)];
            nn::leaky_relu_grad(acts.pre[static_cast<std::size_t>(i - 1)].v,
                                gx.v, gpre.v, kLeakySlope);
        } else {
            gcur = std::move(gx);
        }
    }

    std::vector<float> gfc_post(gcur.v.begin(), gcur.v.end());
    std::vector<float> gfc_pre(gfc_post.size());
    nn::leaky_relu_grad(acts.fc_pre, gfc_post, gfc_pre, kLeakySlope);
    fc_.backward(z, gfc_pre, gz, chunks[0], chunks[1]);
}

// ---------------------------------------------------------------------------
// Spec-facing wrappers

nn::Volume to_volume(const VoxelGrid& grid) {
    nn::Volume vol(1, grid.dims[0], grid.dims[1], grid.dims[2]);
    vol.v = grid.values;
    return vol;
}

VoxelGrid to_voxel_grid(const nn::Volume& vol, std::array<int, 3> dims) {
    VoxelGrid grid(dims[0], dims[1], dims[2]);
    grid.values = vol.v;
    return grid;
}

EncoderOutput encode(const EncoderNet& encoder, const VoxelGrid& x) {
    if (x.dims != encoder.config().input_shape)
        throw std::invalid_argument("encode: input shape mismatch");
    EncoderActs acts;
    encoder.forward(to_volume(x), acts);
    EncoderOutput out;
    out.posterior.mu.assign(acts.mu.begin(), acts.mu.end());
    out.posterior.log_variance.assign(acts.logvar.begin(), acts.logvar.end());
    out.posterior.validate();
    return out;
}

DecoderOutput decode(const DecoderNet& decoder, const LatentCode& z) {
    if (z.dim() != decoder.config().latent_dim)
        throw std::invalid_argument("decode: latent length mismatch");
    std::vector<float> zf(z.z.begin(), z.z.end());
    DecoderActs acts;
    decoder.forward(zf, acts);
    DecoderOutput out;
    out.logits_grid = to_voxel_grid(acts.pre.back(), decoder.config().input_shape);
    out.occupancy_grid =
        to_voxel_grid(acts.post.back(), decoder.config().input_shape);
    return out;
}

DecoderNet clone_decoder_architecture(const ModelConfig& config,
                                      std::uint64_t fresh_seed) {
    return DecoderNet(config, fresh_seed);
}

std::vector<float> snapshot_params(
    const std::vector<std::span<const float>>& chunks) {
    std::vector<float> blob;
    std::size_t total = 0;
    for (const auto& c : chunks) total += c.size();
    blob.reserve(total);
    for (const auto& c : chunks) blob.insert(blob.end(), c.begin(), c.end());
    return blob;
}

void restore_params(const std::vector<std::span<float>>& chunks,
                    std::span<const float> blob) {
    std::size_t off = 0;
    for (const auto& c : chunks) {
        if (off + c.size() > blob.size())
            throw std::invalid_argument("restore_params: blob too small");
        std::memcpy(c.data(), blob.data() + off, c.size() * sizeof(float));
        off += c.size();
    }
    if (off != blob.size())
        throw std::invalid_argument("restore_params: blob size mismatch");
}

std::uint64_t params_hash(const std::vector<std::span<const float>>& chunks) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& c : chunks) {
        const auto* p = reinterpret_cast<const unsigned char*>(c.data());
        for (std::size_t i = 0; i < c.size() * sizeof(float); ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace bvae
