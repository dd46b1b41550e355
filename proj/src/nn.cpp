#include "bvae/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bvae/rng.hpp"

namespace bvae::nn {

namespace {

constexpr int K = 4; // kernel edge; stride 2, pad 1 throughout

// Range of source indices s with 2s + off inside [0, dst_dim). Used for both
// conv (source = output) and deconv (source = input).
inline void stride2_range(int off, int dst_dim, int src_dim, int& lo,
                          int& hi_excl) {
    lo = off < 0 ? (1 - off) / 2 : 0;
    const int num = dst_dim - 1 - off;
    const int hi = num >= 0 ? num / 2 : -1; // floor; num >= -2 in this domain
    hi_excl = (hi < src_dim - 1 ? hi : src_dim - 1) + 1;
    if (hi_excl < lo) hi_excl = lo;
}

void init_normal(std::vector<float>& dst, double stddev, std::uint64_t seed) {
    NormalSampler sampler(seed);
    for (float& x : dst) x = static_cast<float>(stddev * sampler.next());
}

} // namespace

// ---------------------------------------------------------------------------
// Conv3d

Conv3d::Conv3d(int in_channels, int out_channels)
    : in_ch(in_channels), out_ch(out_channels),
      w(static_cast<std::size_t>(out_channels) * in_channels * K * K * K, 0.0f),
      b(static_cast<std::size_t>(out_channels), 0.0f) {}

void Conv3d::init_params(std::uint64_t seed) {
    init_normal(w, std::sqrt(2.0 / (in_ch * K * K * K)), seed);
    std::fill(b.begin(), b.end(), 0.0f);
}

Volume Conv3d::forward(const Volume& x) const {
    if (x.c != in_ch || x.d % 2 || x.h % 2 || x.w % 2)
        throw std::invalid_argument("Conv3d: bad input shape");
    Volume y(out_ch, x.d / 2, x.h / 2, x.w / 2);
    const std::size_t out_sp = y.spatial();
    for (int oc = 0; oc < out_ch; ++oc)
        std::fill_n(y.channel(oc), out_sp, b[oc]);

    for (int oc = 0; oc < out_ch; ++oc) {
        for (int ic = 0; ic < in_ch; ++ic) {
            const float* xc = x.channel(ic);
            float* yc = y.channel(oc);
            const float* wk = &w[(static_cast<std::size_t>(oc) * in_ch + ic) * K * K * K];
            for (int kz = 0; kz < K; ++kz) {
                int z0, z1;
                stride2_range(kz - 1, x.d, y.d, z0, z1);
                for (int ky = 0; ky < K; ++ky) {
                    int y0, y1;
                    stride2_range(ky - 1, x.h, y.h, y0, y1);
                    for (int kx = 0; kx < K; ++kx) {
                        int x0, x1;
                        stride2_range(kx - 1, x.w, y.w, x0, x1);
                        const float wv = wk[(kz * K + ky) * K + kx];
                        for (int oz = z0; oz < z1; ++oz) {
                            const int iz = 2 * oz + kz - 1;
                            for (int oy = y0; oy < y1; ++oy) {
                                const int iy = 2 * oy + ky - 1;
                                const float* xrow = xc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                float* yrow = yc + (static_cast<std::size_t>(oz) * y.h + oy) * y.w;
                                const int kxm1 = kx - 1;
                                for (int ox = x0; ox < x1; ++ox)
                                    yrow[ox] += wv * xrow[2 * ox + kxm1];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

void Conv3d::backward(const Volume& x, const Volume& gy, Volume* gx,
                      std::span<float> gw, std::span<float> gb) const {
    if (gw.size() != w.size() || gb.size() != b.size())
        throw std::invalid_argument("Conv3d::backward: grad span size mismatch");
    if (gx) *gx = Volume(x.c, x.d, x.h, x.w);

    for (int oc = 0; oc < out_ch; ++oc) {
        const float* gyc = gy.channel(oc);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < gy.spatial(); ++i) acc_b += gyc[i];
        gb[oc] += static_cast<float>(acc_b);

        for (int ic = 0; ic < in_ch; ++ic) {
            const float* xc = x.channel(ic);
            float* gxc = gx ? gx->channel(ic) : nullptr;
            const std::size_t wbase = (static_cast<std::size_t>(oc) * in_ch + ic) * K * K * K;
            for (int kz = 0; kz < K; ++kz) {
                int z0, z1;
                stride2_range(kz - 1, x.d, gy.d, z0, z1);
                for (int ky = 0; ky < K; ++ky) {
                    int y0, y1;
                    stride2_range(ky - 1, x.h, gy.h, y0, y1);
                    for (int kx = 0; kx < K; ++kx) {
                        int x0, x1;
                        stride2_range(kx - 1, x.w, gy.w, x0, x1);
                        const float wv = w[wbase + (kz * K + ky) * K + kx];
                        double acc_w = 0.0;
                        for (int oz = z0; oz < z1; ++oz) {
                            const int iz = 2 * oz + kz - 1;
                            for (int oy = y0; oy < y1; ++oy) {
                                const int iy = 2 * oy + ky - 1;
                                const float* xrow = xc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                const float* gyrow = gyc + (static_cast<std::size_t>(oz) * gy.h + oy) * gy.w;
                                const int kxm1 = kx - 1;
                                if (gxc) {
                                    float* gxrow = gxc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                    for (int ox = x0; ox < x1; ++ox) {
                                        acc_w += static_cast<double>(gyrow[ox]) * xrow[2 * ox + kxm1];
                                        gxrow[2 * ox + kxm1] += wv * gyrow[ox];
                                    }
                                } else {
                                    for (int ox = x0; ox < x1; ++ox)
                                        acc_w += static_cast<double>(gyrow[ox]) * xrow[2 * ox + kxm1];
                                }
                            }
                        }
                        gw[wbase + (kz * K + ky) * K + kx] += static_cast<float>(acc_w);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Deconv3d

Deconv3d::Deconv3d(int in_channels, int out_channels)
    : in_ch(in_channels), out_ch(out_channels),
      w(static_cast<std::size_t>(in_channels) * out_channels * K * K * K, 0.0f),
      b(static_cast<std::size_t>(out_channels), 0.0f) {}

void Deconv3d::init_params(std::uint64_t seed) {
    init_normal(w, std::sqrt(2.0 / (in_ch * K * K * K)), seed);
    std::fill(b.begin(), b.end(), 0.0f);
}

Volume Deconv3d::forward(const Volume& x) const {
    if (x.c != in_ch)
        throw std::invalid_argument("Deconv3d: bad input channels");
    Volume y(out_ch, 2 * x.d, 2 * x.h, 2 * x.w);
    for (int oc = 0; oc < out_ch; ++oc)
        std::fill_n(y.channel(oc), y.spatial(), b[oc]);

    for (int ic = 0; ic < in_ch; ++ic) {
        const float* xc = x.channel(ic);
        for (int oc = 0; oc < out_ch; ++oc) {
            float* yc = y.channel(oc);
            const std::size_t wbase = (static_cast<std::size_t>(ic) * out_ch + oc) * K * K * K;
            for (int kz = 0; kz < K; ++kz) {
                int z0, z1;
                stride2_range(kz - 1, y.d, x.d, z0, z1);
                for (int ky = 0; ky < K; ++ky) {
                    int y0, y1;
                    stride2_range(ky - 1, y.h, x.h, y0, y1);
                    for (int kx = 0; kx < K; ++kx) {
                        int x0, x1;
                        stride2_range(kx - 1, y.w, x.w, x0, x1);
                        const float wv = w[wbase + (kz * K + ky) * K + kx];
                        for (int iz = z0; iz < z1; ++iz) {
                            const int oz = 2 * iz + kz - 1;
                            for (int iy = y0; iy < y1; ++iy) {
                                const int oy = 2 * iy + ky - 1;
                                const float* xrow = xc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                float* yrow = yc + (static_cast<std::size_t>(oz) * y.h + oy) * y.w;
                                const int kxm1 = kx - 1;
                                for (int ix = x0; ix < x1; ++ix)
                                    yrow[2 * ix + kxm1] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

void Deconv3d::backward(const Volume& x, const Volume& gy, Volume* gx,
                        std::span<float> gw, std::span<float> gb) const {
    if (gw.size() != w.size() || gb.size() != b.size())
        throw std::invalid_argument("Deconv3d::backward: grad span size mismatch");
    if (gx) *gx = Volume(x.c, x.d, x.h, x.w);

    for (int oc = 0; oc < out_ch; ++oc) {
        const float* gyc = gy.channel(oc);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < gy.spatial(); ++i) acc_b += gyc[i];
        gb[oc] += static_cast<float>(acc_b);
    }

    for (int ic = 0; ic < in_ch; ++ic) {
        const float* xc = x.channel(ic);
        float* gxc = gx ? gx->channel(ic) : nullptr;
        for (int oc = 0; oc < out_ch; ++oc) {
            const float* gyc = gy.channel(oc);
            const std::size_t wbase = (static_cast<std::size_t>(ic) * out_ch + oc) * K * K * K;
            for (int kz = 0; kz < K; ++kz) {
                int z0, z1;
                stride2_range(kz - 1, gy.d, x.d, z0, z1);
                for (int ky = 0; ky < K; ++ky) {
                    int y0, y1;
                    stride2_range(ky - 1, gy.h, x.h, y0, y1);
                    for (int kx = 0; kx < K; ++kx) {
                        int x0, x1;
                        stride2_range(kx - 1, gy.w, x.w, x0, x1);
                        const float wv = w[wbase + (kz * K + ky) * K + kx];
                        double acc_w = 0.0;
                        for (int iz = z0; iz < z1; ++iz) {
                            const int oz = 2 * iz + kz - 1;
                            for (int iy = y0; iy < y1; ++iy) {
                                const int oy = 2 * iy + ky - 1;
                                const float* xrow = xc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                const float* gyrow = gyc + (static_cast<std::size_t>(oz) * gy.h + oy) * gy.w;
                                const int kxm1 = kx - 1;
                                if (gxc) {
                                    float* gxrow = gxc + (static_cast<std::size_t>(iz) * x.h + iy) * x.w;
                                    for (int ix = x0; ix < x1; ++ix) {
                                        acc_w += static_cast<double>(gyrow[2 * ix + kxm1]) * xrow[ix];
                                        gxrow[ix] += wv * gyrow[2 * ix + kxm1];
                                    }
                                } else {
                                    for (int ix = x0; ix < x1; ++ix)
                                        acc_w += static_cast<double>(gyrow[2 * ix + kxm1]) * xrow[ix];
                                }
                            }
                        }
                        gw[wbase + (kz * K + ky) * K + kx] += static_cast<float>(acc_w);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in, int out)
    : in_dim(in), out_dim(out),
      w(static_cast<std::size_t>(in) * out, 0.0f),
      b(static_cast<std::size_t>(out), 0.0f) {}

void Linear::init_params(std::uint64_t seed) {
    init_normal(w, std::sqrt(1.0 / in_dim), seed);
    std::fill(b.begin(), b.end(), 0.0f);
}

void Linear::forward(std::span<const float> x, std::span<float> y) const {
    if (x.size() != static_cast<std::size_t>(in_dim) ||
        y.size() != static_cast<std::size_t>(out_dim))
        throw std::invalid_argument("Linear: bad span sizes");
    for (int o = 0; o < out_dim; ++o) {
        const float* row = &w[static_cast<std::size_t>(o) * in_dim];
        double acc = b[o];
        for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(row[i]) * x[i];
        y[o] = static_cast<float>(acc);
    }
}

void Linear::backward(std::span<const float> x, std::span<const float> gy,
                      std::span<float> gx, std::span<float> gw,
                      std::span<float> gb) const {
    if (gw.size() != w.size() || gb.size() != b.size())
        throw std::invalid_argument("Linear::backward: grad span size mismatch");
    if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0f);
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        gb[o] += g;
        const float* row = &w[static_cast<std::size_t>(o) * in_dim];
        float* grow = &gw[static_cast<std::size_t>(o) * in_dim];
        if (!gx.empty()) {
            for (int i = 0; i < in_dim; ++i) {
                grow[i] += g * x[i];
                gx[i] += g * row[i];
            }
        } else {
            for (int i = 0; i < in_dim; ++i) grow[i] += g * x[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Activations

void leaky_relu(std::span<const float> x, std::span<float> y, float slope) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_grad(std::span<const float> x, std::span<const float> gy,
                     std::span<float> gx, float slope) {
    for (std::size_t i = 0; i < x.size(); ++i)
        gx[i] = x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void sigmoid(std::span<const float> x, std::span<float> y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void sigmoid_grad_from_output(std::span<const float> y,
                              std::span<const float> gy, std::span<float> gx) {
    for (std::size_t i = 0; i < y.size(); ++i)
        gx[i] = gy[i] * y[i] * (1.0f - y[i]);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::size_t n_params, double learning_rate)
    : lr(learning_rate), m(n_params, 0.0), v(n_params, 0.0) {}

void Adam::step(const std::vector<std::span<float>>& params,
                std::span<const float> grad) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::size_t off = 0;
    for (const auto& chunk : params) {
        for (std::size_t i = 0; i < chunk.size(); ++i, ++off) {
            const double g = grad[off];
            m[off] = beta1 * m[off] + (1.0 - beta1) * g;
            v[off] = beta2 * v[off] + (1.0 - beta2) * g * g;
            const double mhat = m[off] / bc1;
            const double vhat = v[off] / bc2;
            chunk[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
    if (off != m.size())
        throw std::invalid_argument("Adam::step: parameter count changed");
}

} // namespace bvae::nn
