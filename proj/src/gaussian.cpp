#include "bvae/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bvae/rng.hpp"

namespace bvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
}

// Stable mean / standard-error accumulator (Welford).
struct RunningStats {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    double std_error() const {
        if (n < 2) return 0.0;
        const double var = m2 / static_cast<double>(n - 1);
        return std::sqrt(var / static_cast<double>(n));
    }
    McEstimate estimate() const { return {mean, std_error(), n}; }
};

} // namespace

double DiagonalGaussian::sigma(int i) const {
    return std::exp(0.5 * log_variance[static_cast<std::size_t>(i)]);
}

void DiagonalGaussian::validate() const {
    require(!mu.empty(), "DiagonalGaussian: dimension must be >= 1");
    require(mu.size() == log_variance.size(),
            "DiagonalGaussian: mu and log_variance lengths differ");
    require(all_finite(mu) && all_finite(log_variance),
            "DiagonalGaussian: non-finite entry");
}

double kld_reverse_closed_form(const DiagonalGaussian& q) {
    q.validate();
    double acc = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        const double lv = q.log_variance[static_cast<std::size_t>(i)];
        const double mu = q.mu[static_cast<std::size_t>(i)];
        acc += -0.5 * (1.0 + lv) + 0.5 * std::exp(lv) + 0.5 * mu * mu;
    }
    return acc;
}

double kld_forward_closed_form(const DiagonalGaussian& q) {
    q.validate();
    double acc = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        const double lv = q.log_variance[static_cast<std::size_t>(i)];
        const double mu = q.mu[static_cast<std::size_t>(i)];
        const double inv_var = std::exp(-lv);
        acc += 0.5 * (lv - 1.0 + inv_var + mu * mu * inv_var);
    }
    return acc;
}

double log_density(const DiagonalGaussian& q, const std::vector<double>& z) {
    if (z.size() != q.mu.size())
        throw std::invalid_argument("log_density: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lv = q.log_variance[i];
        const double r = z[i] - q.mu[i];
        acc += -0.5 * (kLog2Pi + lv) - 0.5 * r * r * std::exp(-lv);
    }
    return acc;
}

LatentCode reparameterize(const DiagonalGaussian& q,
                          const std::vector<double>& epsilon) {
    q.validate();
    if (epsilon.size() != q.mu.size())
        throw std::invalid_argument("reparameterize: epsilon length mismatch");
    LatentCode out;
    out.z.resize(q.mu.size());
    for (std::size_t i = 0; i < q.mu.size(); ++i)
        out.z[i] = q.mu[i] + q.sigma(static_cast<int>(i)) * epsilon[i];
    return out;
}

McEstimate kld_reverse_mc(const DiagonalGaussian& q, std::int64_t n_samples,
                          std::uint64_t seed) {
    q.validate();
    if (n_samples < 1)
        throw std::invalid_argument("kld_reverse_mc: n_samples must be >= 1");

    const DiagonalGaussian prior{std::vector<double>(q.mu.size(), 0.0),
                                 std::vector<double>(q.mu.size(), 0.0)};
    NormalSampler noise(mix_seed(seed, 0x6b6c645f6d63ULL));
    std::vector<double> eps(q.mu.size()), z(q.mu.size());
    RunningStats stats;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        for (double& e : eps) e = noise.next();
        z = reparameterize(q, eps).z;
        stats.add(log_density(q, z) - log_density(prior, z));
    }
    return stats.estimate();
}

MiDecomposition mi_decomposition_check(
    const std::vector<DiagonalGaussian>& posteriors, std::int64_t n_samples,
    std::uint64_t seed) {
    require(posteriors.size() >= 2,
            "mi_decomposition_check: need at least 2 posteriors");
    require(n_samples >= 1, "mi_decomposition_check: n_samples must be >= 1");
    const std::size_t dim = posteriors.front().mu.size();
    for (const auto& q : posteriors) {
        q.validate();
        require(q.mu.size() == dim, "mi_decomposition_check: mismatched d");
    }

    const std::size_t k = posteriors.size();
    const double log_k = std::log(static_cast<double>(k));
    const DiagonalGaussian prior{std::vector<double>(dim, 0.0),
                                 std::vector<double>(dim, 0.0)};

    MiDecomposition out;
    for (const auto& q : posteriors) out.lhs += kld_reverse_closed_form(q);
    out.lhs /= static_cast<double>(k);

    // Stratified draws: n_samples spread evenly over the uniform mixture.
    NormalSampler noise(mix_seed(seed, 0x6d695f646563ULL));
    std::vector<double> eps(dim), z(dim), log_q(k);
    RunningStats mi_stats, agg_stats, sum_stats;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        const std::size_t comp = static_cast<std::size_t>(s) % k;
        for (double& e : eps) e = noise.next();
        z = reparameterize(posteriors[comp], eps).z;

        double max_lq = -1e308;
        for (std::size_t j = 0; j < k; ++j) {
            log_q[j] = log_density(posteriors[j], z);
            max_lq = std::max(max_lq, log_q[j]);
        }
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(log_q[j] - max_lq);
        const double log_mix = max_lq + std::log(lse) - log_k;

        const double mi_term = log_q[comp] - log_mix;
        const double agg_term = log_mix - log_density(prior, z);
        mi_stats.add(mi_term);
        agg_stats.add(agg_term);
        sum_stats.add(mi_term + agg_term);
    }
    out.mi = mi_stats.estimate();
    out.aggregate_kld = agg_stats.estimate();
    out.residual = out.lhs - sum_stats.mean;
    out.residual_std_error = sum_stats.std_error();
    return out;
}

} // namespace bvae
