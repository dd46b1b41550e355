#pragma once

#include <array>
#include <string>
#include <vector>

#include "bvae/data.hpp"
#include "bvae/networks.hpp"

namespace bvae {

// Posterior-mean latent codes of a triplet dataset, aligned by subject.
// Means (not samples) keep the downstream vector arithmetic deterministic.
struct ClassLatents {
    std::vector<std::string> subject_ids;
    std::vector<std::vector<double>> z_complete;
    std::vector<std::vector<double>> z_cranial;
    std::vector<std::vector<double>> z_facial;

    int count() const { return static_cast<int>(subject_ids.size()); }
    int dim() const {
        return z_complete.empty() ? 0 : static_cast<int>(z_complete.front().size());
    }
    const std::vector<std::vector<double>>& of(SkullClass c) const;
};

struct DeviationVectors {
    std::vector<double> dev_cranial; // mean(z_complete) - mean(z_cranial)
    std::vector<double> dev_facial;  // mean(z_complete) - mean(z_facial)

    const std::vector<double>& of(SkullClass defect_class) const;
};

ClassLatents encode_dataset(const EncoderNet& encoder,
                            const TripletDataset& dataset);

// Restriction to a subject subset (for the held-in/held-out protocol).
ClassLatents select_subjects(const ClassLatents& latents,
                             const std::vector<int>& indices);

DeviationVectors deviation_vectors(const ClassLatents& latents);

// z' = z + gamma * dev; gamma == 0 returns z unchanged (bitwise).
std::vector<double> completion_latent(const std::vector<double>& z,
                                      const std::vector<double>& dev,
                                      double gamma);

// decode(encode(x).mu + gamma * dev_class): gamma 0 reproduces the defective
// input, 1 completes it, >1 extrapolates (thicker implant).
VoxelGrid complete_shape(const EncoderNet& encoder, const DecoderNet& decoder,
                         const VoxelGrid& x_defective, SkullClass defect_class,
                         double gamma, const DeviationVectors& dev);

// Voxelwise completed AND NOT defective, on binarized grids.
VoxelGrid implant_extract(const VoxelGrid& completed,
                          const VoxelGrid& defective_input);

struct GammaSweep {
    std::vector<double> gammas;
    std::vector<VoxelGrid> outputs; // soft occupancy, aligned with gammas
};

GammaSweep sweep_gamma(const EncoderNet& encoder, const DecoderNet& decoder,
                       const VoxelGrid& x_defective, SkullClass defect_class,
                       const std::vector<double>& gammas,
                       const DeviationVectors& dev);

// Two-component PCA fitted on the pooled latents of all three classes.
struct PcaProjection {
    std::array<std::vector<double>, 2> components; // orthonormal, d each
    std::vector<double> pooled_mean;
    std::array<double, 2> explained_variance{0.0, 0.0}; // fractions, nonincreasing
    bool degenerate = false; // all-identical latents: defined, zero variance

    std::vector<std::array<double, 2>> complete, cranial, facial;
    std::array<double, 2> centroid_complete{}, centroid_cranial{}, centroid_facial{};

    std::array<double, 2> project(const std::vector<double>& z) const;
};

PcaProjection pca_project(const ClassLatents& latents);

// CSV columns: subject_id,class,pc1,pc2
std::string pca_csv(const ClassLatents& latents, const PcaProjection& proj);

} // namespace bvae
