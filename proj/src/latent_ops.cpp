#include "bvae/latent_ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace bvae {

const std::vector<std::vector<double>>& ClassLatents::of(SkullClass c) const {
    switch (c) {
        case SkullClass::complete: return z_complete;
        case SkullClass::cranial: return z_cranial;
        case SkullClass::facial: return z_facial;
    }
    throw std::invalid_argument("bad class");
}

const std::vector<double>& DeviationVectors::of(SkullClass defect_class) const {
    if (defect_class == SkullClass::cranial) return dev_cranial;
    if (defect_class == SkullClass::facial) return dev_facial;
    throw std::invalid_argument("deviation vector: defect class must be cranial or facial");
}

ClassLatents encode_dataset(const EncoderNet& encoder,
                            const TripletDataset& dataset) {
    ClassLatents out;
    for (const SkullTriplet& t : dataset.triplets) {
        out.subject_ids.push_back(t.subject_id);
        out.z_complete.push_back(encode(encoder, t.complete).posterior.mu);
        out.z_cranial.push_back(encode(encoder, t.cranial_defect).posterior.mu);
        out.z_facial.push_back(encode(encoder, t.facial_defect).posterior.mu);
    }
    return out;
}

ClassLatents select_subjects(const ClassLatents& latents,
                             const std::vector<int>& indices) {
    ClassLatents out;
    for (int i : indices) {
        const std::size_t u = static_cast<std::size_t>(i);
        if (u >= latents.subject_ids.size())
            throw std::invalid_argument("select_subjects: index out of range");
        out.subject_ids.push_back(latents.subject_ids[u]);
        out.z_complete.push_back(latents.z_complete[u]);
        out.z_cranial.push_back(latents.z_cranial[u]);
        out.z_facial.push_back(latents.z_facial[u]);
    }
    return out;
}

namespace {

std::vector<double> mean_of(const std::vector<std::vector<double>>& rows) {
    std::vector<double> mean(rows.front().size(), 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r[i];
    for (double& m : mean) m /= static_cast<double>(rows.size());
    return mean;
}

} // namespace

DeviationVectors deviation_vectors(const ClassLatents& latents) {
    if (latents.count() == 0)
        throw std::invalid_argument("deviation_vectors: empty latents");
    const auto mean_co = mean_of(latents.z_complete);
    const auto mean_cr = mean_of(latents.z_cranial);
    const auto mean_fa = mean_of(latents.z_facial);
    DeviationVectors dev;
    dev.dev_cranial.resize(mean_co.size());
    dev.dev_facial.resize(mean_co.size());
    for (std::size_t i = 0; i < mean_co.size(); ++i) {
        dev.dev_cranial[i] = mean_co[i] - mean_cr[i];
        dev.dev_facial[i] = mean_co[i] - mean_fa[i];
    }
    return dev;
}

std::vector<double> completion_latent(const std::vector<double>& z,
                                      const std::vector<double>& dev,
                                      double gamma) {
    if (gamma == 0.0) return z;
    if (z.size() != dev.size())
        throw std::invalid_argument("completion_latent: dimension mismatch");
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] + gamma * dev[i];
    return out;
}

VoxelGrid complete_shape(const EncoderNet& encoder, const DecoderNet& decoder,
                         const VoxelGrid& x_defective, SkullClass defect_class,
                         double gamma, const DeviationVectors& dev) {
    const EncoderOutput enc = encode(encoder, x_defective);
    const auto z = completion_latent(enc.posterior.mu, dev.of(defect_class), gamma);
    return decode(decoder, LatentCode{z}).occupancy_grid;
}

VoxelGrid implant_extract(const VoxelGrid& completed,
                          const VoxelGrid& defective_input) {
    return voxel_difference(completed, defective_input);
}

GammaSweep sweep_gamma(const EncoderNet& encoder, const DecoderNet& decoder,
                       const VoxelGrid& x_defective, SkullClass defect_class,
                       const std::vector<double>& gammas,
                       const DeviationVectors& dev) {
    GammaSweep sweep;
    sweep.gammas = gammas;
    const EncoderOutput enc = encode(encoder, x_defective);
    for (double g : gammas) {
        const auto z = completion_latent(enc.posterior.mu, dev.of(defect_class), g);
        sweep.outputs.push_back(decode(decoder, LatentCode{z}).occupancy_grid);
    }
    return sweep;
}

std::array<double, 2> PcaProjection::project(const std::vector<double>& z) const {
    std::array<double, 2> p{0.0, 0.0};
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < pooled_mean.size(); ++i)
            p[static_cast<std::size_t>(c)] +=
                (z[i] - pooled_mean[i]) * components[static_cast<std::size_t>(c)][i];
    return p;
}

PcaProjection pca_project(const ClassLatents& latents) {
    const int n = latents.count();
    const int d = latents.dim();
    const int total = 3 * n;
    if (total <= 2)
        throw std::invalid_argument("pca_project: need more than 2 samples");

    Eigen::MatrixXd pooled(total, d);
    int row = 0;
    for (const auto* cls : {&latents.z_complete, &latents.z_cranial, &latents.z_facial})
        for (const auto& z : *cls) {
            for (int i = 0; i < d; ++i) pooled(row, i) = z[static_cast<std::size_t>(i)];
            ++row;
        }

    const Eigen::RowVectorXd mean = pooled.colwise().mean();
    const Eigen::MatrixXd centered = pooled.rowwise() - mean;
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(total - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigendecomposition failed");
    const auto& evals = solver.eigenvalues();   // ascending
    const auto& evecs = solver.eigenvectors();

    PcaProjection proj;
    proj.pooled_mean.assign(mean.data(), mean.data() + d);
    const double total_var = std::max(evals.sum(), 0.0);
    proj.degenerate = total_var < 1e-12;

    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd comp = evecs.col(d - 1 - c);
        // Deterministic sign: largest-magnitude entry made positive.
        int arg = 0;
        comp.cwiseAbs().maxCoeff(&arg);
        if (comp[arg] < 0.0) comp = -comp;
        proj.components[static_cast<std::size_t>(c)]
            .assign(comp.data(), comp.data() + d);
        const double ev = std::max(evals[d - 1 - c], 0.0);
        proj.explained_variance[static_cast<std::size_t>(c)] =
            proj.degenerate ? 0.0 : ev / total_var;
    }

    auto project_all = [&](const std::vector<std::vector<double>>& rows,
                           std::vector<std::array<double, 2>>& out) {
        for (const auto& z : rows) out.push_back(proj.project(z));
    };
    project_all(latents.z_complete, proj.complete);
    project_all(latents.z_cranial, proj.cranial);
    project_all(latents.z_facial, proj.facial);

    proj.centroid_complete = proj.project(mean_of(latents.z_complete));
    proj.centroid_cranial = proj.project(mean_of(latents.z_cranial));
    proj.centroid_facial = proj.project(mean_of(latents.z_facial));
    return proj;
}

std::string pca_csv(const ClassLatents& latents, const PcaProjection& proj) {
    std::ostringstream os;
    os << "subject_id,class,pc1,pc2\n";
    char buf[128];
    auto emit = [&](const std::vector<std::array<double, 2>>& pts, SkullClass c) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n",
                          latents.subject_ids[i].c_str(), to_string(c),
                          pts[i][0], pts[i][1]);
            os << buf;
        }
    };
    emit(proj.complete, SkullClass::complete);
    emit(proj.cranial, SkullClass::cranial);
    emit(proj.facial, SkullClass::facial);
    return os.str();
}

} // namespace bvae
