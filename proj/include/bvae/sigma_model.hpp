#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvae {

// The linear sigma head sigma = theta1^T * phi: a fixed feature vector
// phi in R^m and a weight matrix theta1 in R^{m x d}. Sigma is parameterized
// directly (no exp), matching the analytic gradient being verified; values
// sigma_i <= 0 are outside the objective's domain.
struct LinearSigmaModel {
    Eigen::MatrixXd theta1; // m x d
    Eigen::VectorXd phi;    // m

    int feature_dim() const { return static_cast<int>(phi.size()); }
    int latent_dim() const { return static_cast<int>(theta1.cols()); }
    void validate() const;
};

struct GdStep {
    Eigen::VectorXd sigma;  // after the update
    double kld = 0.0;       // of the updated sigma (mu = 0)
    double grad_max = 0.0;  // max |gradient entry| used for the update
};

struct GdTrace {
    double beta = 0.0;
    double alpha = 0.0;
    Eigen::VectorXd initial_sigma;
    double initial_kld = 0.0;
    std::vector<GdStep> records; // one per applied step

    int step_count() const { return static_cast<int>(records.size()); }
};

class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(int step, const std::string& what)
        : std::runtime_error(what), step(step) {}
    int step;
};

// sigma = theta1^T * phi, exactly.
Eigen::VectorXd sigma_from_weights(const LinearSigmaModel& model);

// Reverse KLD evaluated on raw sigma (and mu): throws std::domain_error if
// any sigma_i <= 0, where the log is undefined.
double kld_of_sigma(const Eigen::VectorXd& sigma, const Eigen::VectorXd& mu);

// Entry (k,i) = beta * (sigma_i^2 - 1) / sigma_i * phi_k. The mu path is
// excluded; only the sigma-dependent KLD terms enter.
Eigen::MatrixXd analytic_kld_gradient(const LinearSigmaModel& model,
                                      double beta);

// Central-difference oracle for the analytic gradient:
// (KLD(theta + h E_ki) - KLD(theta - h E_ki)) * beta / (2h).
// Throws std::domain_error naming the entry if a perturbation leaves sigma > 0.
Eigen::MatrixXd finite_difference_kld_gradient(const LinearSigmaModel& model,
                                               double beta, double h = 1e-6);

// Max over entries of |analytic - reference| / max(|analytic|, floor), with a
// caller-supplied gradient to compare against the finite-difference oracle.
// Used both for verification and for mutation-testing the checker itself.
double max_rel_gradient_error(
    const LinearSigmaModel& model, double beta, double h,
    const std::function<Eigen::MatrixXd(const LinearSigmaModel&, double)>&
        gradient_fn);

// Plain gradient descent on the beta-weighted sigma-KLD objective
// (theta <- theta - alpha * grad). Initial sigma must be positive; the
// monotone-growth argument applies on (0,1) and sigma = 1 is the fixed point.
// Throws SimulationDiverged (with the step index) if sigma leaves (0, inf).
GdTrace simulate_gd(const LinearSigmaModel& model, double beta, double alpha,
                    int steps);

// CSV rows: step, kld, grad_max, sigma_0..sigma_{d-1}; step 0 is the
// initial state.
std::string gd_trace_csv(const GdTrace& trace);

} // namespace bvae
