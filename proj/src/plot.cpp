#include "bvae/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace bvae {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill.r;
        pixels[i + 1] = fill.g;
        pixels[i + 2] = fill.b;
    }
}

void Image::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
}

void Image::line(int x0, int y0, int x1, int y1, Rgb c) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

void Image::rect(int x0, int y0, int x1, int y1, Rgb c) {
    line(x0, y0, x1, y0, c);
    line(x1, y0, x1, y1, c);
    line(x1, y1, x0, y1, c);
    line(x0, y1, x0, y0, c);
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) set(x, y, c);
}

void Image::disc(int cx, int cy, int radius, Rgb c) {
    for (int y = -radius; y <= radius; ++y)
        for (int x = -radius; x <= radius; ++x)
            if (x * x + y * y <= radius * radius) set(cx + x, cy + y, c);
}

void Image::arrow(int x0, int y0, int x1, int y1, Rgb c) {
    line(x0, y0, x1, y1, c);
    const double ang = std::atan2(static_cast<double>(y1 - y0),
                                  static_cast<double>(x1 - x0));
    const double head = 7.0;
    for (double side : {0.5, -0.5}) {
        const int hx = x1 - static_cast<int>(std::lround(head * std::cos(ang + side)));
        const int hy = y1 - static_cast<int>(std::lround(head * std::sin(ang + side)));
        line(x1, y1, hx, hy, c);
    }
}

namespace {

// 3x5 glyphs for numeric labels.
struct Glyph {
    char ch;
    unsigned char rows[5]; // 3 low bits per row
};

constexpr Glyph kGlyphs[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}},
    {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}},
    {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}},
    {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}},
    {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}},
    {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {'.', {0b000, 0b000, 0b000, 0b000, 0b010}},
    {'-', {0b000, 0b000, 0b111, 0b000, 0b000}},
    {'e', {0b000, 0b111, 0b110, 0b100, 0b111}},
    {'+', {0b000, 0b010, 0b111, 0b010, 0b000}},
};

const Glyph* find_glyph(char ch) {
    for (const Glyph& g : kGlyphs)
        if (g.ch == ch) return &g;
    return nullptr;
}

void png_chunk(std::ofstream& out, const char* type,
               const std::vector<unsigned char>& data) {
    auto be32 = [](std::uint32_t v) {
        return std::array<unsigned char, 4>{
            static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    };
    const auto len = be32(static_cast<std::uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    out.write(type, 4);
    if (!data.empty())
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    const auto crcb = be32(crc);
    out.write(reinterpret_cast<const char*>(crcb.data()), 4);
}

} // namespace

void Image::text(int x, int y, const std::string& s, Rgb c) {
    int cx = x;
    for (char ch : s) {
        if (const Glyph* g = find_glyph(ch)) {
            for (int r = 0; r < 5; ++r)
                for (int b = 0; b < 3; ++b)
                    if (g->rows[r] & (1 << (2 - b))) set(cx + b, y + r, c);
        }
        cx += 4;
    }
}

void write_png(const Image& img, const std::filesystem::path& path) {
    // Raw scanlines with filter byte 0, deflate via zlib.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(img.height) * (1 + 3 * img.width));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const unsigned char* row =
            img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(img.width) * 3);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    comp.resize(comp_len);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_png: cannot open " + path.string());
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr(13, 0);
    const auto put32 = [&](std::size_t off, std::uint32_t v) {
        ihdr[off] = static_cast<unsigned char>(v >> 24);
        ihdr[off + 1] = static_cast<unsigned char>(v >> 16);
        ihdr[off + 2] = static_cast<unsigned char>(v >> 8);
        ihdr[off + 3] = static_cast<unsigned char>(v);
    };
    put32(0, static_cast<std::uint32_t>(img.width));
    put32(4, static_cast<std::uint32_t>(img.height));
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // RGB
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", comp);
    png_chunk(out, "IEND", {});
    if (!out) throw std::runtime_error("write_png: write failed for " + path.string());
}

Image latent_scatter_image(const PcaProjection& proj) {
    const int size = 560, margin = 50;
    Image img(size, size);

    double lo = -1.0, hi = 1.0;
    auto widen = [&](const std::vector<std::array<double, 2>>& pts) {
        for (const auto& p : pts) {
            lo = std::min({lo, p[0], p[1]});
            hi = std::max({hi, p[0], p[1]});
        }
    };
    widen(proj.complete);
    widen(proj.cranial);
    widen(proj.facial);
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto px = [&](double v) {
        return margin + static_cast<int>(std::lround((v - lo) / (hi - lo) *
                                                      (size - 2 * margin)));
    };
    auto py = [&](double v) {
        return size - margin -
               static_cast<int>(std::lround((v - lo) / (hi - lo) * (size - 2 * margin)));
    };

    const Rgb axis{150, 150, 150};
    img.rect(margin, margin, size - margin, size - margin, axis);
    if (lo < 0.0 && hi > 0.0) {
        img.line(px(0.0), margin, px(0.0), size - margin, {220, 220, 220});
        img.line(margin, py(0.0), size - margin, py(0.0), {220, 220, 220});
    }
    char label[32];
    std::snprintf(label, sizeof(label), "%.2g", lo);
    img.text(margin, size - margin + 6, label, axis);
    std::snprintf(label, sizeof(label), "%.2g", hi);
    img.text(size - margin - 20, size - margin + 6, label, axis);

    const Rgb col_complete{40, 150, 60};
    const Rgb col_cranial{60, 90, 220};
    const Rgb col_facial{220, 60, 60};
    auto draw_class = [&](const std::vector<std::array<double, 2>>& pts, Rgb c) {
        for (const auto& p : pts) img.disc(px(p[0]), py(p[1]), 2, c);
    };
    draw_class(proj.complete, col_complete);
    draw_class(proj.cranial, col_cranial);
    draw_class(proj.facial, col_facial);

    img.disc(px(proj.centroid_complete[0]), py(proj.centroid_complete[1]), 6, col_complete);
    img.disc(px(proj.centroid_cranial[0]), py(proj.centroid_cranial[1]), 6, col_cranial);
    img.disc(px(proj.centroid_facial[0]), py(proj.centroid_facial[1]), 6, col_facial);

    const Rgb black{0, 0, 0};
    img.arrow(px(proj.centroid_cranial[0]), py(proj.centroid_cranial[1]),
              px(proj.centroid_complete[0]), py(proj.centroid_complete[1]), black);
    img.arrow(px(proj.centroid_facial[0]), py(proj.centroid_facial[1]),
              px(proj.centroid_complete[0]), py(proj.centroid_complete[1]), black);
    return img;
}

Image boxplot_image(
    const std::vector<std::pair<std::string, std::vector<double>>>& groups,
    double y_min, double y_max) {
    if (groups.empty()) throw std::invalid_argument("boxplot_image: no groups");
    const int width = 120 * static_cast<int>(groups.size()) + 80;
    const int height = 360, top = 30, bottom = 40, left = 50;
    Image img(width, height);
    const Rgb axis{120, 120, 120};
    img.line(left, top, left, height - bottom, axis);
    img.line(left, height - bottom, width - 20, height - bottom, axis);

    auto py = [&](double v) {
        const double t = (v - y_min) / (y_max - y_min);
        return height - bottom -
               static_cast<int>(std::lround(t * (height - top - bottom)));
    };
    for (double tick = 0.0; tick <= 1.0001; tick += 0.25) {
        const double v = y_min + tick * (y_max - y_min);
        char label[16];
        std::snprintf(label, sizeof(label), "%.2f", v);
        img.text(8, py(v) - 2, label, axis);
        img.line(left - 3, py(v), left, py(v), axis);
    }

    const Rgb box{60, 90, 220};
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        std::vector<double> v = groups[gi].second;
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        auto q = [&](double p) {
            const double h = p * static_cast<double>(v.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi2 = std::min(lo + 1, v.size() - 1);
            return v[lo] + (h - std::floor(h)) * (v[hi2] - v[lo]);
        };
        const int cx = left + 60 + 120 * static_cast<int>(gi);
        const int half = 32;
        img.line(cx, py(v.front()), cx, py(q(0.25)), box);
        img.line(cx, py(q(0.75)), cx, py(v.back()), box);
        img.line(cx - 12, py(v.front()), cx + 12, py(v.front()), box);
        img.line(cx - 12, py(v.back()), cx + 12, py(v.back()), box);
        img.rect(cx - half, py(q(0.75)), cx + half, py(q(0.25)), box);
        img.line(cx - half, py(q(0.5)), cx + half, py(q(0.5)), {220, 60, 60});
        char label[16];
        std::snprintf(label, sizeof(label), "%zu", gi);
        img.text(cx - 2, height - bottom + 8, label, axis);
    }
    return img;
}

Image slice_montage_image(const std::vector<const VoxelGrid*>& grids,
                          int scale) {
    if (grids.empty())
        throw std::invalid_argument("slice_montage_image: no grids");
    const auto dims = grids.front()->dims;
    for (const VoxelGrid* g : grids)
        if (g->dims != dims)
            throw std::invalid_argument("slice_montage_image: mixed grid shapes");

    const int gap = 4;
    const int tile_w = dims[2] * scale, tile_h = dims[1] * scale;
    Image img(static_cast<int>(grids.size()) * (tile_w + gap) + gap,
              tile_h + 2 * gap, {30, 30, 30});
    const int z = dims[0] / 2;
    for (std::size_t gi = 0; gi < grids.size(); ++gi) {
        const int ox = gap + static_cast<int>(gi) * (tile_w + gap);
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[2]; ++x) {
                const float v = std::clamp(grids[gi]->at(z, y, x), 0.0f, 1.0f);
                const auto g = static_cast<unsigned char>(std::lround(v * 255.0f));
                img.fill_rect(ox + x * scale, gap + y * scale,
                              ox + x * scale + scale - 1,
                              gap + y * scale + scale - 1, {g, g, g});
            }
    }
    return img;
}

} // namespace bvae
