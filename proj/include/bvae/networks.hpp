#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bvae/gaussian.hpp"
#include "bvae/nn.hpp"
#include "bvae/voxel.hpp"

namespace bvae {

// Architecture description. The toy default is a 32^3 input with 4
// halving conv layers; the 6-layer setting needs every dim >= 64.
// Fixed choices recorded in checkpoint manifests: 4^3 kernels, stride 2,
// LeakyReLU(0.1) hidden activations, sigmoid output, no normalization,
// channel widths doubling per layer from base_channels.
struct ModelConfig {
    std::array<int, 3> input_shape{32, 32, 32}; // (D, H, W)
    int latent_dim = 32;
    int num_layers = 4;
    int base_channels = 8;
    std::uint64_t seed = 0;

    void validate() const; // dims divisible by 2^num_layers, positive fields
    int encoder_out_channels() const { return base_channels << (num_layers - 1); }
    std::array<int, 3> bottleneck_shape() const;
    int flat_dim() const;
    bool operator==(const ModelConfig&) const = default;
};

inline constexpr float kLeakySlope = 0.1f;

struct EncoderActs {
    std::vector<nn::Volume> pre;  // conv outputs before activation
    std::vector<nn::Volume> post; // after activation; post.back() is flattened
    std::vector<float> mu, logvar;
};

struct DecoderActs {
    std::vector<float> fc_pre, fc_post;
    std::vector<nn::Volume> pre;  // deconv outputs; pre.back() = logits
    std::vector<nn::Volume> post; // activations; post.back() = occupancy
};

struct EncoderOutput {
    DiagonalGaussian posterior;
};

struct DecoderOutput {
    VoxelGrid logits_grid;
    VoxelGrid occupancy_grid;
};

class EncoderNet {
public:
    explicit EncoderNet(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::size_t param_count() const { return n_params_; }
    std::vector<std::span<float>> params();
    std::vector<std::span<const float>> params() const;

    void forward(const nn::Volume& x, EncoderActs& acts) const;
    // gmu/glogvar are d-length gradients; accumulates into grad (n_params).
    void backward(const nn::Volume& x, const EncoderActs& acts,
                  std::span<const float> gmu, std::span<const float> glogvar,
                  std::span<float> grad) const;

private:
    ModelConfig config_;
    std::vector<nn::Conv3d> convs_;
    nn::Linear mu_head_, logvar_head_;
    std::size_t n_params_ = 0;
};

class DecoderNet {
public:
    explicit DecoderNet(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::uint64_t init_seed() const { return init_seed_; }
    std::size_t param_count() const { return n_params_; }
    std::vector<std::span<float>> params();
    std::vector<std::span<const float>> params() const;

    void forward(std::span<const float> z, DecoderActs& acts) const;
    // g_occupancy has input_shape volume; accumulates into grad; writes the
    // latent gradient into gz (d-length) if non-empty.
    void backward(std::span<const float> z, const DecoderActs& acts,
                  std::span<const float> g_occupancy, std::span<float> grad,
                  std::span<float> gz) const;

private:
    ModelConfig config_;
    nn::Linear fc_;
    std::vector<nn::Deconv3d> deconvs_;
    std::uint64_t init_seed_ = 0;
    std::size_t n_params_ = 0;
};

// Spec-facing wrappers over the nets.
EncoderOutput encode(const EncoderNet& encoder, const VoxelGrid& x);
DecoderOutput decode(const DecoderNet& decoder, const LatentCode& z);

// Fresh decoder with the same architecture and independent parameters.
DecoderNet clone_decoder_architecture(const ModelConfig& config,
                                      std::uint64_t fresh_seed);

// Flat float32 snapshots in the fixed chunk order, for checkpoints/hashing.
std::vector<float> snapshot_params(const std::vector<std::span<const float>>& chunks);
void restore_params(const std::vector<std::span<float>>& chunks,
                    std::span<const float> blob);
std::uint64_t params_hash(const std::vector<std::span<const float>>& chunks);

inline std::vector<std::span<const float>> as_const_chunks(
    const std::vector<std::span<float>>& chunks) {
    return {chunks.begin(), chunks.end()};
}
inline std::vector<float> snapshot_params(
    const std::vector<std::span<float>>& chunks) {
    return snapshot_params(as_const_chunks(chunks));
}
inline std::uint64_t params_hash(const std::vector<std::span<float>>& chunks) {
    return params_hash(as_const_chunks(chunks));
}

nn::Volume to_volume(const VoxelGrid& grid);
VoxelGrid to_voxel_grid(const nn::Volume& vol, std::array<int, 3> dims);

} // namespace bvae
