#include "bvae/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "bvae/rng.hpp"

namespace bvae {

const char* to_string(SkullClass c) {
    switch (c) {
        case SkullClass::complete: return "complete";
        case SkullClass::cranial: return "cranial";
        case SkullClass::facial: return "facial";
    }
    return "?";
}

SkullClass skull_class_from_string(const std::string& s) {
    if (s == "complete") return SkullClass::complete;
    if (s == "cranial") return SkullClass::cranial;
    if (s == "facial") return SkullClass::facial;
    throw std::invalid_argument("unknown skull class: " + s);
}

const VoxelGrid& SkullTriplet::grid(SkullClass c) const {
    switch (c) {
        case SkullClass::complete: return complete;
        case SkullClass::cranial: return cranial_defect;
        case SkullClass::facial: return facial_defect;
    }
    throw std::invalid_argument("bad class");
}

const DefectBox& SkullTriplet::box(SkullClass c) const {
    if (c == SkullClass::cranial) return cranial_box;
    if (c == SkullClass::facial) return facial_box;
    throw std::invalid_argument("complete class has no defect box");
}

namespace {

double uniform_in(std::mt19937_64& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

DefectBox bounding_box_of_removed(const VoxelGrid& complete,
                                  const VoxelGrid& defective) {
    DefectBox box;
    box.min = {complete.dims[0], complete.dims[1], complete.dims[2]};
    box.max = {-1, -1, -1};
    for (int z = 0; z < complete.dims[0]; ++z)
        for (int y = 0; y < complete.dims[1]; ++y)
            for (int x = 0; x < complete.dims[2]; ++x)
                if (complete.at(z, y, x) > 0.5f && !(defective.at(z, y, x) > 0.5f)) {
                    box.min = {std::min(box.min[0], z), std::min(box.min[1], y),
                               std::min(box.min[2], x)};
                    box.max = {std::max(box.max[0], z), std::max(box.max[1], y),
                               std::max(box.max[2], x)};
                }
    return box;
}

SkullTriplet generate_one(int index, std::array<int, 3> dims,
                          std::uint64_t seed) {
    const int D = dims[0], H = dims[1], W = dims[2];
    std::mt19937_64 eng(mix_seed(seed, 0x7472697 /*triplet*/, static_cast<std::uint64_t>(index)));

    // Pose: jittered center, per-axis outer radii, shell thickness, and a
    // small rotation about the z axis.
    const double cz = 0.5 * D + uniform_in(eng, -1.5, 1.5);
    const double cy = 0.5 * H + uniform_in(eng, -1.5, 1.5);
    const double cx = 0.5 * W + uniform_in(eng, -1.5, 1.5);
    const double rz = uniform_in(eng, 0.26, 0.32) * D;
    const double ry = uniform_in(eng, 0.26, 0.31) * H;
    const double rx = uniform_in(eng, 0.26, 0.32) * W;
    const double thickness = std::max(1.3, uniform_in(eng, 0.10, 0.16) *
                                               std::min({rz, ry, rx}));
    const double angle = uniform_in(eng, -0.25, 0.25);
    const double ca = std::cos(angle), sa = std::sin(angle);

    // Frontal protrusion (face analog): a smaller ellipsoid shell centered on
    // the anterior (+y) pole, slightly below the equator.
    const double pz = cz - 0.20 * rz;
    const double py = cy + 0.85 * ry;
    const double px = cx;
    const double prz = 0.35 * rz, pry = 0.40 * ry, prx = 0.35 * rx;

    auto in_shell = [&](double z, double y, double x, double centz,
                        double centy, double centx, double az, double ay,
                        double ax) {
        const double dz = z - centz;
        const double dy0 = y - centy;
        const double dx0 = x - centx;
        const double dy = ca * dy0 - sa * dx0;
        const double dx = sa * dy0 + ca * dx0;
        auto quad = [&](double qz, double qy, double qx) {
            return (dz * dz) / (qz * qz) + (dy * dy) / (qy * qy) +
                   (dx * dx) / (qx * qx);
        };
        if (quad(az, ay, ax) > 1.0) return false;
        const double iz = std::max(0.5, az - thickness);
        const double iy = std::max(0.5, ay - thickness);
        const double ix = std::max(0.5, ax - thickness);
        return quad(iz, iy, ix) >= 1.0;
    };

    SkullTriplet t;
    char id[16];
    std::snprintf(id, sizeof(id), "s%04d", index);
    t.subject_id = id;
    t.complete = VoxelGrid(D, H, W);
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const bool cranium = in_shell(z, y, x, cz, cy, cx, rz, ry, rx);
                const bool face = in_shell(z, y, x, pz, py, px, prz, pry, prx);
                if (cranium || face) t.complete.at(z, y, x) = 1.0f;
            }

    // Cranial defect: subtract a superior sphere.
    const double sz = cz + 0.90 * rz;
    const double sy = cy + uniform_in(eng, -0.2, 0.2) * ry;
    const double sx = cx + uniform_in(eng, -0.2, 0.2) * rx;
    const double sr = uniform_in(eng, 0.45, 0.60) * rz;
    t.cranial_defect = t.complete;
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dz = z - sz, dy = y - sy, dx = x - sx;
                if (dz * dz + dy * dy + dx * dx <= sr * sr)
                    t.cranial_defect.at(z, y, x) = 0.0f;
            }

    // Facial defect: subtract an anterior box spanning the protrusion.
    const int by0 = static_cast<int>(std::floor(cy + 0.55 * ry));
    const int bz0 = static_cast<int>(std::floor(cz - 0.50 * rz));
    const int bz1 = static_cast<int>(std::ceil(cz + 0.45 * rz));
    const int bx0 = static_cast<int>(std::floor(cx - 0.55 * rx));
    const int bx1 = static_cast<int>(std::ceil(cx + 0.55 * rx));
    t.facial_defect = t.complete;
    for (int z = std::max(0, bz0); z <= std::min(D - 1, bz1); ++z)
        for (int y = std::max(0, by0); y < H; ++y)
            for (int x = std::max(0, bx0); x <= std::min(W - 1, bx1); ++x)
                t.facial_defect.at(z, y, x) = 0.0f;

    t.cranial_box = bounding_box_of_removed(t.complete, t.cranial_defect);
    t.facial_box = bounding_box_of_removed(t.complete, t.facial_defect);
    validate_triplet(t);
    return t;
}

} // namespace

void validate_triplet(const SkullTriplet& t) {
    if (!t.complete.same_shape(t.cranial_defect) ||
        !t.complete.same_shape(t.facial_defect))
        throw std::invalid_argument(t.subject_id + ": triplet shapes differ");
    const std::size_t complete_count = t.complete.count_set();
    if (complete_count == 0)
        throw std::invalid_argument(t.subject_id + ": complete grid is empty");
    for (SkullClass c : {SkullClass::cranial, SkullClass::facial}) {
        const VoxelGrid& def = t.grid(c);
        std::size_t removed = 0;
        for (std::size_t i = 0; i < def.size(); ++i) {
            if (def.values[i] > 0.5f && !(t.complete.values[i] > 0.5f))
                throw std::invalid_argument(t.subject_id +
                                            ": defective grid not a subset of complete");
            removed += t.complete.values[i] > 0.5f && !(def.values[i] > 0.5f);
        }
        if (removed == 0)
            throw std::invalid_argument(t.subject_id + ": " +
                                        std::string(to_string(c)) + " defect is empty");
        if (2 * removed >= complete_count)
            throw std::invalid_argument(t.subject_id + ": " +
                                        std::string(to_string(c)) +
                                        " defect removes >= 50% of the skull");
    }
}

TripletDataset generate_synthetic_triplets(int n, std::array<int, 3> dims,
                                           std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_synthetic_triplets: n must be >= 1");
    for (int d : dims)
        if (d < 16)
            throw std::invalid_argument(
                "generate_synthetic_triplets: dims too small to fit shell (need >= 16)");

    TripletDataset ds;
    ds.generator_seed = seed;
    ds.dims = dims;
    ds.triplets.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ds.triplets.push_back(generate_one(i, dims, seed));
    return ds;
}

namespace {

nlohmann::json box_to_json(const DefectBox& b) {
    return {{"min", b.min}, {"max", b.max}};
}

DefectBox box_from_json(const nlohmann::json& j) {
    DefectBox b;
    b.min = j.at("min").get<std::array<int, 3>>();
    b.max = j.at("max").get<std::array<int, 3>>();
    return b;
}

} // namespace

void save_dataset(const TripletDataset& dataset,
                  const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    nlohmann::json manifest;
    manifest["format"] = "bvae-dataset";
    manifest["version"] = 1;
    manifest["generator_seed"] = dataset.generator_seed;
    manifest["dims"] = dataset.dims;
    nlohmann::json subjects = nlohmann::json::array();
    for (const SkullTriplet& t : dataset.triplets) {
        const auto dir = root / t.subject_id;
        std::filesystem::create_directories(dir);
        save_voxel_file(t.complete, dir / "complete.vox");
        save_voxel_file(t.cranial_defect, dir / "cranial.vox");
        save_voxel_file(t.facial_defect, dir / "facial.vox");
        subjects.push_back({{"id", t.subject_id},
                            {"cranial_box", box_to_json(t.cranial_box)},
                            {"facial_box", box_to_json(t.facial_box)}});
    }
    manifest["subjects"] = subjects;
    std::ofstream out(root / "manifest.json", std::ios::trunc);
    if (!out)
        throw std::runtime_error("save_dataset: cannot write manifest under " +
                                 root.string());
    out << manifest.dump(2) << "\n";
}

TripletDataset load_dataset(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in)
        throw CorruptFileError("load_dataset: missing manifest in " + root.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("load_dataset: bad manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "bvae-dataset")
        throw UnsupportedFormatError("load_dataset: not a dataset manifest");

    TripletDataset ds;
    ds.generator_seed = manifest.value("generator_seed", std::uint64_t{0});
    ds.dims = manifest.at("dims").get<std::array<int, 3>>();
    for (const auto& s : manifest.at("subjects")) {
        SkullTriplet t;
        t.subject_id = s.at("id").get<std::string>();
        const auto dir = root / t.subject_id;
        t.complete = load_voxel_file(dir / "complete.vox");
        t.cranial_defect = load_voxel_file(dir / "cranial.vox");
        t.facial_defect = load_voxel_file(dir / "facial.vox");
        t.cranial_box = box_from_json(s.at("cranial_box"));
        t.facial_box = box_from_json(s.at("facial_box"));
        validate_triplet(t);
        ds.triplets.push_back(std::move(t));
    }
    return ds;
}

} // namespace bvae
