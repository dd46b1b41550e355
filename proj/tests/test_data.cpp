#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bvae/data.hpp"

using namespace bvae;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    const auto dir = fs::temp_directory_path() / (std::string("bvae_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("synthetic triplets satisfy every invariant") {
    const auto ds = generate_synthetic_triplets(30, {32, 32, 32}, 7);
    REQUIRE(ds.triplets.size() == 30);
    for (const SkullTriplet& t : ds.triplets) {
        CHECK_NOTHROW(validate_triplet(t));
        CHECK(t.complete.is_binary());
        CHECK(t.cranial_defect.is_binary());
        CHECK(t.facial_defect.is_binary());

        const std::size_t complete_count = t.complete.count_set();
        for (SkullClass c : {SkullClass::cranial, SkullClass::facial}) {
            const std::size_t removed =
                complete_count - t.grid(c).count_set();
            CHECK(removed > 0);
            CHECK(2 * removed < complete_count);
            CHECK_FALSE(t.box(c).empty());
        }
    }
}

TEST_CASE("defect boxes exactly bound the removed voxels") {
    const auto ds = generate_synthetic_triplets(5, {32, 32, 32}, 3);
    for (const SkullTriplet& t : ds.triplets) {
        for (SkullClass c : {SkullClass::cranial, SkullClass::facial}) {
            const VoxelGrid removed = voxel_difference(t.complete, t.grid(c));
            const DefectBox& box = t.box(c);
            bool touched_min[3] = {false, false, false};
            bool touched_max[3] = {false, false, false};
            for (int z = 0; z < 32; ++z)
                for (int y = 0; y < 32; ++y)
                    for (int x = 0; x < 32; ++x) {
                        if (!(removed.at(z, y, x) > 0.5f)) continue;
                        CHECK(box.contains(z, y, x));
                        const int idx[3] = {z, y, x};
                        for (int a = 0; a < 3; ++a) {
                            touched_min[a] |= idx[a] == box.min[a];
                            touched_max[a] |= idx[a] == box.max[a];
                        }
                    }
            for (int a = 0; a < 3; ++a) {
                CHECK(touched_min[a]);
                CHECK(touched_max[a]);
            }
        }
    }
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = generate_synthetic_triplets(4, {32, 32, 32}, 11);
    const auto b = generate_synthetic_triplets(4, {32, 32, 32}, 11);
    const auto c = generate_synthetic_triplets(4, {32, 32, 32}, 12);
    for (std::size_t i = 0; i < a.triplets.size(); ++i) {
        CHECK(a.triplets[i].complete.values == b.triplets[i].complete.values);
        CHECK(a.triplets[i].cranial_defect.values == b.triplets[i].cranial_defect.values);
        CHECK(a.triplets[i].facial_defect.values == b.triplets[i].facial_defect.values);
    }
    bool any_diff = false;
    for (std::size_t i = 0; i < a.triplets.size(); ++i)
        any_diff |= a.triplets[i].complete.values != c.triplets[i].complete.values;
    CHECK(any_diff);
}

TEST_CASE("generator rejects bad arguments") {
    CHECK_THROWS_AS(generate_synthetic_triplets(0, {32, 32, 32}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_triplets(1, {8, 8, 8}, 1),
                    std::invalid_argument);
}

TEST_CASE("voxel file round trip is bitwise for binary grids") {
    const auto dir = temp_dir("voxio");
    const auto ds = generate_synthetic_triplets(1, {32, 32, 32}, 5);
    const VoxelGrid& g = ds.triplets[0].complete;
    save_voxel_file(g, dir / "g.vox");
    const VoxelGrid r = load_voxel_file(dir / "g.vox");
    CHECK(r.dims == g.dims);
    CHECK(r.values == g.values);
    CHECK(r.spacing == g.spacing);
}

TEST_CASE("voxel file error paths") {
    const auto dir = temp_dir("voxerr");
    VoxelGrid g(16, 16, 16, 1.0f);
    save_voxel_file(g, dir / "g.vox");

    SUBCASE("truncated payload is a corrupt-file error") {
        fs::resize_file(dir / "g.vox", 100);
        CHECK_THROWS_AS(load_voxel_file(dir / "g.vox"), CorruptFileError);
    }
    SUBCASE("flipped byte fails the checksum") {
        std::fstream f(dir / "g.vox",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(10);
        f.put('\x07');
        f.close();
        CHECK_THROWS_AS(load_voxel_file(dir / "g.vox"), CorruptFileError);
    }
    SUBCASE("missing sidecar is a corrupt-file error") {
        fs::remove(dir / "g.vox.json");
        CHECK_THROWS_AS(load_voxel_file(dir / "g.vox"), CorruptFileError);
    }
    SUBCASE("unknown extension is an unsupported-format error") {
        CHECK_THROWS_AS(load_voxel_file(dir / "g.nii"), UnsupportedFormatError);
        CHECK_THROWS_AS(save_voxel_file(g, dir / "g.raw"), UnsupportedFormatError);
    }
}

TEST_CASE("paper-resolution 256x256x128 header round trips") {
    const auto dir = temp_dir("voxbig");
    VoxelGrid g(128, 256, 256);
    g.spacing = {1.0, 0.449, 0.449};
    for (std::size_t i = 0; i < g.size(); i += 977) g.values[i] = 1.0f;
    save_voxel_file(g, dir / "big.vox");
    const VoxelGrid r = load_voxel_file(dir / "big.vox");
    CHECK(r.dims == std::array<int, 3>{128, 256, 256});
    CHECK(r.spacing[1] == doctest::Approx(0.449));
    CHECK(r.values == g.values);
}

TEST_CASE("downsample") {
    SUBCASE("factor 1 is the identity") {
        VoxelGrid g(16, 16, 16);
        g.values[5] = 1.0f;
        const auto out = downsample(g, 1);
        CHECK(out.values == g.values);
    }
    SUBCASE("uniform grid stays uniform") {
        const auto out = downsample(VoxelGrid(16, 16, 16, 1.0f), 2);
        CHECK(out.dims == std::array<int, 3>{8, 8, 8});
        for (float v : out.values) CHECK(v == 1.0f);
    }
    SUBCASE("majority rule on a 2x2x2 block") {
        VoxelGrid g(2, 2, 2);
        for (int i = 0; i < 5; ++i) g.values[static_cast<std::size_t>(i)] = 1.0f;
        CHECK(downsample(g, 2).values[0] == 1.0f);
        g.values[4] = 0.0f; // 4 of 8: tie goes to background
        CHECK(downsample(g, 2).values[0] == 0.0f);
    }
    SUBCASE("bad factors and dims rejected") {
        CHECK_THROWS_AS(downsample(VoxelGrid(12, 12, 12), 8), std::invalid_argument);
        CHECK_THROWS_AS(downsample(VoxelGrid(16, 16, 16), 3), std::invalid_argument);
    }
}

TEST_CASE("dataset directory round trip with stable manifest") {
    const auto dir = temp_dir("dataset");
    const auto ds = generate_synthetic_triplets(3, {32, 32, 32}, 9);
    save_dataset(ds, dir / "d1");
    save_dataset(ds, dir / "d2");

    std::ifstream m1(dir / "d1" / "manifest.json"), m2(dir / "d2" / "manifest.json");
    const std::string s1((std::istreambuf_iterator<char>(m1)), {});
    const std::string s2((std::istreambuf_iterator<char>(m2)), {});
    CHECK(s1 == s2);

    const auto loaded = load_dataset(dir / "d1");
    CHECK(loaded.generator_seed == 9);
    REQUIRE(loaded.triplets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded.triplets[i].subject_id == ds.triplets[i].subject_id);
        CHECK(loaded.triplets[i].complete.values == ds.triplets[i].complete.values);
        CHECK(loaded.triplets[i].cranial_box.min == ds.triplets[i].cranial_box.min);
        CHECK(loaded.triplets[i].facial_box.max == ds.triplets[i].facial_box.max);
    }
}
