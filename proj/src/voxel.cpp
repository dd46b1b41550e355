#include "bvae/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace bvae {

namespace {
constexpr int kVoxFormatVersion = 1;
}

bool VoxelGrid::is_binary() const {
    return std::all_of(values.begin(), values.end(),
                       [](float v) { return v == 0.0f || v == 1.0f; });
}

std::size_t VoxelGrid::count_set() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(),
                      [](float v) { return v > 0.5f; }));
}

std::uint64_t fnv1a64(const void* data, std::size_t n_bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n_bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void save_voxel_file(const VoxelGrid& grid, const std::filesystem::path& path) {
    if (path.extension() != ".vox")
        throw UnsupportedFormatError("save_voxel_file: expected .vox path, got " +
                                     path.string());
    if (grid.size() !=
        static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2])
        throw std::invalid_argument("save_voxel_file: dims/values size mismatch");

    std::vector<std::uint8_t> bytes(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const float v = std::clamp(grid.values[i], 0.0f, 1.0f);
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }

    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    if (!raw) throw std::runtime_error("save_voxel_file: cannot open " + path.string());
    raw.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    raw.close();
    if (!raw) throw std::runtime_error("save_voxel_file: write failed for " + path.string());

    nlohmann::json side;
    side["format"] = "bvae-vox";
    side["version"] = kVoxFormatVersion;
    side["dims"] = grid.dims;
    side["spacing_mm"] = grid.spacing;
    side["order"] = "zyx";
    side["value_scale"] = 255;
    side["checksum_fnv1a64"] = fnv1a64(bytes.data(), bytes.size());

    std::ofstream meta(path.string() + ".json", std::ios::trunc);
    if (!meta) throw std::runtime_error("save_voxel_file: cannot open sidecar for " + path.string());
    meta << side.dump(2) << "\n";
}

VoxelGrid load_voxel_file(const std::filesystem::path& path) {
    if (path.extension() != ".vox")
        throw UnsupportedFormatError("load_voxel_file: unsupported format " +
                                     path.string());
    std::ifstream meta(path.string() + ".json");
    if (!meta)
        throw CorruptFileError("load_voxel_file: missing sidecar for " + path.string());
    nlohmann::json side;
    try {
        meta >> side;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("load_voxel_file: unreadable sidecar for " +
                               path.string() + ": " + e.what());
    }
    if (side.value("format", "") != "bvae-vox" ||
        side.value("version", -1) != kVoxFormatVersion)
        throw UnsupportedFormatError("load_voxel_file: unknown format/version in " +
                                     path.string());

    VoxelGrid grid;
    const auto dims = side.at("dims").get<std::array<int, 3>>();
    grid.dims = dims;
    grid.spacing = side.value("spacing_mm", std::array<double, 3>{1.0, 1.0, 1.0});
    const std::size_t expect =
        static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];

    std::ifstream raw(path, std::ios::binary);
    if (!raw) throw CorruptFileError("load_voxel_file: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(raw)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() != expect)
        throw CorruptFileError("load_voxel_file: " + path.string() + " holds " +
                               std::to_string(bytes.size()) + " bytes, expected " +
                               std::to_string(expect));
    const auto checksum = side.at("checksum_fnv1a64").get<std::uint64_t>();
    if (fnv1a64(bytes.data(), bytes.size()) != checksum)
        throw CorruptFileError("load_voxel_file: checksum mismatch in " + path.string());

    grid.values.resize(expect);
    for (std::size_t i = 0; i < expect; ++i)
        grid.values[i] = static_cast<float>(bytes[i]) / 255.0f;
    return grid;
}

VoxelGrid downsample(const VoxelGrid& grid, int factor) {
    if (factor < 1 || (factor & (factor - 1)) != 0)
        throw std::invalid_argument("downsample: factor must be a power of two");
    if (factor == 1) return grid;
    for (int d : grid.dims)
        if (d % factor != 0)
            throw std::invalid_argument("downsample: dims not divisible by factor");

    VoxelGrid out(grid.dims[0] / factor, grid.dims[1] / factor,
                  grid.dims[2] / factor);
    out.spacing = {grid.spacing[0] * factor, grid.spacing[1] * factor,
                   grid.spacing[2] * factor};
    const int block = factor * factor * factor;
    for (int z = 0; z < out.dims[0]; ++z)
        for (int y = 0; y < out.dims[1]; ++y)
            for (int x = 0; x < out.dims[2]; ++x) {
                int ones = 0;
                for (int dz = 0; dz < factor; ++dz)
                    for (int dy = 0; dy < factor; ++dy)
                        for (int dx = 0; dx < factor; ++dx)
                            ones += grid.at(z * factor + dz, y * factor + dy,
                                            x * factor + dx) > 0.5f;
                out.at(z, y, x) = (2 * ones > block) ? 1.0f : 0.0f;
            }
    return out;
}

VoxelGrid voxel_difference(const VoxelGrid& a, const VoxelGrid& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("voxel_difference: shape mismatch");
    VoxelGrid out(a.dims[0], a.dims[1], a.dims[2]);
    out.spacing = a.spacing;
    for (std::size_t i = 0; i < a.size(); ++i)
        out.values[i] = (a.values[i] > 0.5f && !(b.values[i] > 0.5f)) ? 1.0f : 0.0f;
    return out;
}

VoxelGrid binarize(const VoxelGrid& grid, float threshold) {
    VoxelGrid out = grid;
    for (float& v : out.values) v = (v > threshold) ? 1.0f : 0.0f;
    return out;
}

} // namespace bvae
