#include "bvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bvae/plot.hpp"
#include "bvae/rng.hpp"

namespace bvae {

double dsc(const VoxelGrid& a, const VoxelGrid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dsc: shape mismatch");
    std::size_t inter = 0, ca = 0, cb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool va = a.values[i] > 0.5f;
        const bool vb = b.values[i] > 0.5f;
        inter += va && vb;
        ca += va;
        cb += vb;
    }
    if (ca + cb == 0) return 1.0; // both empty
    return 2.0 * static_cast<double>(inter) / static_cast<double>(ca + cb);
}

EvalSplit split_subjects(int n_subjects, double holdout_fraction,
                         std::uint64_t seed) {
    if (n_subjects < 1)
        throw std::invalid_argument("split_subjects: need at least one subject");
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
        throw std::invalid_argument("split_subjects: fraction must be in [0,1)");
    std::vector<int> order(static_cast<std::size_t>(n_subjects));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 eng(mix_seed(seed, 0x5b117));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[eng() % i]);

    int n_out = static_cast<int>(std::lround(holdout_fraction * n_subjects));
    if (holdout_fraction > 0.0 && n_out == 0) n_out = 1;
    if (n_out >= n_subjects) n_out = n_subjects - 1;

    EvalSplit split;
    split.held_out.assign(order.begin(), order.begin() + n_out);
    split.held_in.assign(order.begin() + n_out, order.end());
    std::sort(split.held_out.begin(), split.held_out.end());
    std::sort(split.held_in.begin(), split.held_in.end());
    return split;
}

namespace {

std::vector<int> all_subjects(const TripletDataset& dataset) {
    std::vector<int> idx(dataset.triplets.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Type-7 quantile (linear interpolation), matching common stats packages.
double quantile(std::vector<double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

void evaluate_reconstruction(EvalReport& report, const std::string& model_tag,
                             const Reconstructor& reconstruct,
                             const TripletDataset& dataset,
                             const std::vector<int>& subjects) {
    const auto idx = subjects.empty() ? all_subjects(dataset) : subjects;
    for (int i : idx) {
        const SkullTriplet& t = dataset.triplets[static_cast<std::size_t>(i)];
        for (SkullClass c :
             {SkullClass::cranial, SkullClass::facial, SkullClass::complete}) {
            const VoxelGrid& x = t.grid(c);
            EvalRow row;
            row.subject_id = t.subject_id;
            row.model_tag = model_tag;
            row.task = "REC";
            row.skull_class = to_string(c);
            row.dsc = dsc(binarize(reconstruct(x)), x);
            report.rows.push_back(std::move(row));
        }
    }
}

void evaluate_completion(EvalReport& report, const std::string& model_tag,
                         const Completer& complete,
                         const TripletDataset& dataset,
                         const std::vector<int>& subjects, double gamma) {
    for (int i : subjects) {
        const SkullTriplet& t = dataset.triplets[static_cast<std::size_t>(i)];
        for (SkullClass c : {SkullClass::cranial, SkullClass::facial}) {
            EvalRow row;
            row.subject_id = t.subject_id;
            row.model_tag = model_tag;
            row.task = "CMP";
            row.skull_class = to_string(c);
            row.has_gamma = true;
            row.gamma = gamma;
            row.dsc = dsc(binarize(complete(t.grid(c), c, gamma)), t.complete);
            report.rows.push_back(std::move(row));
        }
    }
}

std::vector<EvalSummary> EvalReport::summaries() const {
    std::map<std::tuple<std::string, std::string, std::string>,
             std::vector<double>>
        groups;
    for (const EvalRow& r : rows)
        groups[{r.model_tag, r.task, r.skull_class}].push_back(r.dsc);

    std::vector<EvalSummary> out;
    for (auto& [key, values] : groups) {
        std::sort(values.begin(), values.end());
        EvalSummary s;
        s.model_tag = std::get<0>(key);
        s.task = std::get<1>(key);
        s.skull_class = std::get<2>(key);
        s.count = static_cast<int>(values.size());
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                 static_cast<double>(values.size());
        s.median = quantile(values, 0.5);
        s.q1 = quantile(values, 0.25);
        s.q3 = quantile(values, 0.75);
        s.min = values.front();
        s.max = values.back();
        out.push_back(std::move(s));
    }
    return out;
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "subject_id,model_tag,task,class,gamma,dsc\n";
    char buf[192];
    for (const EvalRow& r : report.rows) {
        if (r.has_gamma)
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.17g,%.17g\n",
                          r.subject_id.c_str(), r.model_tag.c_str(),
                          r.task.c_str(), r.skull_class.c_str(), r.gamma, r.dsc);
        else
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,,%.17g\n",
                          r.subject_id.c_str(), r.model_tag.c_str(),
                          r.task.c_str(), r.skull_class.c_str(), r.dsc);
        os << buf;
    }
    return os.str();
}

std::string report_markdown(const EvalReport& report) {
    std::ostringstream os;
    os << "# DSC evaluation\n\n";
    if (!report.metadata.is_null())
        os << "```\n" << report.metadata.dump(2) << "\n```\n\n";
    os << "| model | task | class | n | mean | median | q1 | q3 |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    char buf[224];
    for (const EvalSummary& s : report.summaries()) {
        std::snprintf(buf, sizeof(buf),
                      "| %s | %s | %s | %d | %.4f | %.4f | %.4f | %.4f |\n",
                      s.model_tag.c_str(), s.task.c_str(), s.skull_class.c_str(),
                      s.count, s.mean, s.median, s.q1, s.q3);
        os << buf;
    }
    os << "\nDSC of two empty masks is 1.0 by convention.\n";
    return os.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
    if (report.rows.empty())
        throw std::invalid_argument("emit_report: empty report");
    std::filesystem::create_directories(dir);

    {
        std::ofstream csv(dir / "dsc.csv", std::ios::trunc);
        if (!csv) throw std::runtime_error("emit_report: cannot write " +
                                           (dir / "dsc.csv").string());
        csv << report_csv(report);
    }
    {
        std::ofstream md(dir / "summary.md", std::ios::trunc);
        if (!md) throw std::runtime_error("emit_report: cannot write " +
                                          (dir / "summary.md").string());
        md << report_markdown(report);
    }

    // One boxplot per (model_tag, task), classes side by side.
    std::map<std::pair<std::string, std::string>,
             std::vector<std::pair<std::string, std::vector<double>>>>
        plots;
    for (const EvalRow& r : report.rows) {
        auto& groups = plots[{r.model_tag, r.task}];
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == r.skull_class; });
        if (it == groups.end()) {
            groups.push_back({r.skull_class, {r.dsc}});
        } else {
            it->second.push_back(r.dsc);
        }
    }
    for (const auto& [key, groups] : plots) {
        const auto img = boxplot_image(groups, 0.0, 1.0);
        write_png(img, dir / ("boxplot_" + key.first + "_" + key.second + ".png"));
    }
}

} // namespace bvae
