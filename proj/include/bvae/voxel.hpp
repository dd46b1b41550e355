#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvae {

// 3D occupancy grid, index order (z, y, x) with x fastest. Ground-truth grids
// are strictly binary {0,1}; network outputs live in [0,1].
struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};              // (D, H, W)
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm, metadata only
    std::vector<float> values;

    VoxelGrid() = default;
    VoxelGrid(int d, int h, int w, float fill = 0.0f)
        : dims{d, h, w},
          values(static_cast<std::size_t>(d) * h * w, fill) {}

    std::size_t size() const { return values.size(); }
    float& at(int z, int y, int x) {
        return values[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x];
    }
    float at(int z, int y, int x) const {
        return values[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x];
    }
    bool same_shape(const VoxelGrid& o) const { return dims == o.dims; }
    bool is_binary() const;
    std::size_t count_set() const; // voxels with value > 0.5
};

class CorruptFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnsupportedFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raw little-endian uint8 volume (value = round(v * 255)) plus a JSON sidecar
// carrying dims, spacing, index order, and an FNV-1a checksum of the payload.
// Lossless round trip for binary grids. `path` must end in ".vox"; the
// sidecar is written next to it as "<path>.json".
void save_voxel_file(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_voxel_file(const std::filesystem::path& path);

// Majority-vote pooling over factor^3 blocks (strict majority; ties go to 0).
// Factor must be a power of two and divide every dim.
VoxelGrid downsample(const VoxelGrid& grid, int factor);

// Voxelwise a > 0.5 AND NOT b > 0.5. Shapes must match.
VoxelGrid voxel_difference(const VoxelGrid& a, const VoxelGrid& b);

VoxelGrid binarize(const VoxelGrid& grid, float threshold = 0.5f);

std::uint64_t fnv1a64(const void* data, std::size_t n_bytes);

} // namespace bvae
