#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bvae/data.hpp"
#include "bvae/latent_ops.hpp"

namespace bvae {

// Dice similarity coefficient 2|a AND b| / (|a| + |b|) on binary grids;
// both-empty pairs score 1.0 by convention.
double dsc(const VoxelGrid& a, const VoxelGrid& b);

struct EvalRow {
    std::string subject_id;
    std::string model_tag;
    std::string task;        // "REC" or "CMP"
    std::string skull_class; // complete / cranial / facial
    bool has_gamma = false;
    double gamma = 0.0;
    double dsc = 0.0;
};

struct EvalSummary {
    std::string model_tag, task, skull_class;
    int count = 0;
    double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    nlohmann::json metadata;

    std::vector<EvalSummary> summaries() const;
};

// Held-in / held-out subject split (shuffled by seed; at least one subject
// stays on each side when 0 < fraction < 1).
struct EvalSplit {
    std::vector<int> held_in;
    std::vector<int> held_out;
};
EvalSplit split_subjects(int n_subjects, double holdout_fraction,
                         std::uint64_t seed);

using Reconstructor = std::function<VoxelGrid(const VoxelGrid&)>;
using Completer =
    std::function<VoxelGrid(const VoxelGrid& defective, SkullClass, double gamma)>;

// REC rows: DSC(binarize(reconstruct(x)), x) per class over the listed
// subjects (all subjects if empty).
void evaluate_reconstruction(EvalReport& report, const std::string& model_tag,
                             const Reconstructor& reconstruct,
                             const TripletDataset& dataset,
                             const std::vector<int>& subjects = {});

// CMP rows: DSC(binarize(complete(x_def, gamma)), x_complete) for cranial and
// facial defects over the listed subjects.
void evaluate_completion(EvalReport& report, const std::string& model_tag,
                         const Completer& complete,
                         const TripletDataset& dataset,
                         const std::vector<int>& subjects, double gamma);

// CSV columns: subject_id,model_tag,task,class,gamma,dsc (gamma empty on REC).
std::string report_csv(const EvalReport& report);
std::string report_markdown(const EvalReport& report);

// Writes dsc.csv, summary.md, and one boxplot PNG per (model_tag, task).
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

} // namespace bvae
