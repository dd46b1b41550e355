#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bvae::nn {

// Dense channel-major volume: index ((c*D + z)*H + y)*W + x.
struct Volume {
    int c = 0, d = 0, h = 0, w = 0;
    std::vector<float> v;

    Volume() = default;
    Volume(int c_, int d_, int h_, int w_)
        : c(c_), d(d_), h(h_), w(w_),
          v(static_cast<std::size_t>(c_) * d_ * h_ * w_, 0.0f) {}

    std::size_t size() const { return v.size(); }
    std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
    float* channel(int ci) { return v.data() + ci * spatial(); }
    const float* channel(int ci) const { return v.data() + ci * spatial(); }
};

// 4^3 kernel, stride 2, pad 1: halves each spatial dim. Weight layout
// [out_ch][in_ch][kz][ky][kx].
struct Conv3d {
    int in_ch = 0, out_ch = 0;
    std::vector<float> w, b;

    Conv3d(int in_channels, int out_channels);
    void init_params(std::uint64_t seed);
    std::size_t param_count() const { return w.size() + b.size(); }

    Volume forward(const Volume& x) const;
    // Accumulates into gw/gb; writes gx if non-null (zeroed first).
    void backward(const Volume& x, const Volume& gy, Volume* gx,
                  std::span<float> gw, std::span<float> gb) const;
};

// Transposed counterpart (4^3 kernel, stride 2, pad 1): doubles each spatial
// dim. Weight layout [in_ch][out_ch][kz][ky][kx].
struct Deconv3d {
    int in_ch = 0, out_ch = 0;
    std::vector<float> w, b;

    Deconv3d(int in_channels, int out_channels);
    void init_params(std::uint64_t seed);
    std::size_t param_count() const { return w.size() + b.size(); }

    Volume forward(const Volume& x) const;
    void backward(const Volume& x, const Volume& gy, Volume* gx,
                  std::span<float> gw, std::span<float> gb) const;
};

struct Linear {
    int in_dim = 0, out_dim = 0;
    std::vector<float> w, b; // w is [out][in], row-major

    Linear(int in, int out);
    void init_params(std::uint64_t seed);
    std::size_t param_count() const { return w.size() + b.size(); }

    void forward(std::span<const float> x, std::span<float> y) const;
    void backward(std::span<const float> x, std::span<const float> gy,
                  std::span<float> gx, std::span<float> gw,
                  std::span<float> gb) const;
};

void leaky_relu(std::span<const float> x, std::span<float> y, float slope);
void leaky_relu_grad(std::span<const float> x, std::span<const float> gy,
                     std::span<float> gx, float slope);
void sigmoid(std::span<const float> x, std::span<float> y);
// gx from the *output* values: gx = gy * y * (1 - y)
void sigmoid_grad_from_output(std::span<const float> y,
                              std::span<const float> gy, std::span<float> gx);

// Plain Adam over a chunked parameter set; moments are kept flat in the
// chunk order, which must not change between steps.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long t = 0;

    explicit Adam(std::size_t n_params, double learning_rate);
    void step(const std::vector<std::span<float>>& params,
              std::span<const float> grad);
};

} // namespace bvae::nn
