#pragma once

#include <cstdint>
#include <vector>

namespace bvae {

// Diagonal Gaussian N(mu, diag(exp(log_variance))). Variance is stored as its
// natural log so sigma_i = exp(log_variance_i / 2) is positive by construction.
struct DiagonalGaussian {
    std::vector<double> mu;
    std::vector<double> log_variance;

    int dim() const { return static_cast<int>(mu.size()); }
    double sigma(int i) const;

    // Throws std::invalid_argument on length mismatch, empty vectors, or
    // non-finite entries.
    void validate() const;
};

struct LatentCode {
    std::vector<double> z;
    int dim() const { return static_cast<int>(z.size()); }
};

// Monte-Carlo point estimate with its sample standard error, so callers can
// apply self-calibrating tolerances (|value - truth| <= k * std_error).
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
};

// Result of checking E_x[D_KL(q(z|x)||p)] = I(x,z) + D_KL(q(z)||p) on a finite
// set of posteriors, with q(z) the uniform mixture of the components.
struct MiDecomposition {
    double lhs = 0.0;            // exact: mean of closed-form reverse KLDs
    McEstimate mi;               // mutual information estimate
    McEstimate aggregate_kld;    // D_KL(q(z)||p) estimate
    double residual = 0.0;       // lhs - mi - aggregate_kld
    double residual_std_error = 0.0;
};

// D_KL(q || N(0,I)) in nats:
//   -1/2 sum_i (1 + log sigma_i^2) + 1/2 sum_i sigma_i^2 + 1/2 sum_i mu_i^2
double kld_reverse_closed_form(const DiagonalGaussian& q);

// D_KL(N(0,I) || q) in nats:
//   1/2 sum_i (log sigma_i^2 - 1 + 1/sigma_i^2 + mu_i^2/sigma_i^2)
double kld_forward_closed_form(const DiagonalGaussian& q);

// Unbiased MC estimator of the reverse KLD: mean of log(q(z)/p(z)), z ~ q.
McEstimate kld_reverse_mc(const DiagonalGaussian& q, std::int64_t n_samples,
                          std::uint64_t seed);

// z_i = mu_i + sigma_i * epsilon_i. Deterministic; linear in epsilon.
LatentCode reparameterize(const DiagonalGaussian& q,
                          const std::vector<double>& epsilon);

// log N(z; mu, diag sigma^2), summed over dimensions.
double log_density(const DiagonalGaussian& q, const std::vector<double>& z);

// Requires >= 2 posteriors of equal dimension. Samples are stratified evenly
// over the mixture components.
MiDecomposition mi_decomposition_check(
    const std::vector<DiagonalGaussian>& posteriors, std::int64_t n_samples,
    std::uint64_t seed);

} // namespace bvae
