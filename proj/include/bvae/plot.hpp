#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bvae/latent_ops.hpp"
#include "bvae/voxel.hpp"

namespace bvae {

struct Rgb {
    unsigned char r = 0, g = 0, b = 0;
};

struct Image {
    int width = 0, height = 0;
    std::vector<unsigned char> pixels; // RGB8, row-major

    Image(int w, int h, Rgb fill = {255, 255, 255});
    void set(int x, int y, Rgb c);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    void rect(int x0, int y0, int x1, int y1, Rgb c);      // outline
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
    void disc(int cx, int cy, int radius, Rgb c);
    void arrow(int x0, int y0, int x1, int y1, Rgb c);
    void text(int x, int y, const std::string& s, Rgb c); // digits . - e only
};

void write_png(const Image& img, const std::filesystem::path& path);

// Fig.4-style scatter: three class clouds, filled centroid markers, arrows
// from the defective centroids to the complete centroid.
Image latent_scatter_image(const PcaProjection& proj);

// Grouped boxplots (label -> samples), fixed y range.
Image boxplot_image(
    const std::vector<std::pair<std::string, std::vector<double>>>& groups,
    double y_min, double y_max);

// Axial mid-slice of each grid, tiled horizontally (one row per grid list
// entry when grids have equal dims). Occupancy maps to grayscale.
Image slice_montage_image(const std::vector<const VoxelGrid*>& grids,
                          int scale = 4);

} // namespace bvae
