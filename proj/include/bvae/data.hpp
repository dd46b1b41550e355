#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bvae/voxel.hpp"

namespace bvae {

enum class SkullClass { complete, cranial, facial };

const char* to_string(SkullClass c);
SkullClass skull_class_from_string(const std::string& s);

// Inclusive axis-aligned bounding box in (z, y, x) voxel indices.
struct DefectBox {
    std::array<int, 3> min{0, 0, 0};
    std::array<int, 3> max{-1, -1, -1};

    bool empty() const { return max[0] < min[0]; }
    bool contains(int z, int y, int x) const {
        return z >= min[0] && z <= max[0] && y >= min[1] && y <= max[1] &&
               x >= min[2] && x <= max[2];
    }
};

// A matched (complete, cranial-defect, facial-defect) trio sharing one
// subject. Defective grids are voxelwise subsets of the complete grid; the
// injected-defect bounding boxes are recorded for synthetic data so implant
// localization can be tested against ground truth.
struct SkullTriplet {
    std::string subject_id;
    VoxelGrid complete;
    VoxelGrid cranial_defect;
    VoxelGrid facial_defect;
    DefectBox cranial_box;
    DefectBox facial_box;

    const VoxelGrid& grid(SkullClass c) const;
    const DefectBox& box(SkullClass c) const; // cranial or facial only
};

struct TripletDataset {
    std::uint64_t generator_seed = 0;
    std::array<int, 3> dims{0, 0, 0};
    std::vector<SkullTriplet> triplets;
};

// Randomized hollow ellipsoid shell with a frontal protrusion as the complete
// skull; the cranial defect removes a superior spherical region, the facial
// defect an anterior box. Per-subject size/pose are randomized within bounds.
// Requires every dim >= 16 so the shell fits.
TripletDataset generate_synthetic_triplets(int n, std::array<int, 3> dims,
                                           std::uint64_t seed);

// Directory layout: <root>/<subject_id>/{complete,cranial,facial}.vox plus
// sidecars, and a top-level manifest.json with subjects, defect boxes, and
// the generator seed.
void save_dataset(const TripletDataset& dataset,
                  const std::filesystem::path& root);
TripletDataset load_dataset(const std::filesystem::path& root);

// Throws std::invalid_argument describing the first violated invariant
// (subset relation, nonempty defects, defect size bound).
void validate_triplet(const SkullTriplet& t);

} // namespace bvae
