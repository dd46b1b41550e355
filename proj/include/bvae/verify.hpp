#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bvae/sigma_model.hpp"

namespace bvae {

struct CheckResult {
    std::string name;
    bool pass = false;
    double observed = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool all_pass() const;
    std::string table() const; // fixed-width pass/fail table
};

struct MathCheckOptions {
    std::uint64_t seed = 42;
    int gradient_trials = 100;      // random models, m <= 8, d <= 4
    double gradient_tolerance = 1e-5;
    int kld_mc_trials = 50;         // random gaussians, d <= 8
    std::int64_t mc_samples = 100000;
    int growth_trials = 50;         // sigma-growth / beta-dominance runs
    int growth_steps = 100;
    // Gradient used against the finite-difference oracle; swapped out by the
    // mutation test to prove the checker catches a wrong formula.
    std::function<Eigen::MatrixXd(const LinearSigmaModel&, double)> gradient_fn =
        [](const LinearSigmaModel& m, double beta) {
            return analytic_kld_gradient(m, beta);
        };
};

// Random LinearSigmaModel with every derived sigma_i inside (sigma_lo,
// sigma_hi) and phi entries bounded away from zero.
LinearSigmaModel random_sigma_model(std::mt19937_64& eng, int max_m, int max_d,
                                    double sigma_lo, double sigma_hi);

// Runs every closed-form-vs-oracle check of the gaussian math and the KLD
// gradient analysis: gradient agreement, matrix/elementwise identity,
// KLD closed form vs MC, forward/reverse asymmetry, the Eq.-4 style mixture
// decomposition, sigma growth and beta dominance under GD.
VerifyReport run_math_checks(const MathCheckOptions& options = {});

// The beta=1 vs beta=100 GD traces behind the sigma-growth check, as CSV
// (filename stem -> contents) for the verify-math CLI to emit.
std::vector<std::pair<std::string, std::string>> verify_trace_csvs(
    std::uint64_t seed);

} // namespace bvae
