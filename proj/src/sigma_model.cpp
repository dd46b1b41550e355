#include "bvae/sigma_model.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace bvae {

void LinearSigmaModel::validate() const {
    if (theta1.rows() < 1 || theta1.cols() < 1)
        throw std::invalid_argument("LinearSigmaModel: m and d must be >= 1");
    if (phi.size() != theta1.rows())
        throw std::invalid_argument("LinearSigmaModel: phi length != rows of theta1");
    if (!theta1.allFinite() || !phi.allFinite())
        throw std::invalid_argument("LinearSigmaModel: non-finite entry");
}

Eigen::VectorXd sigma_from_weights(const LinearSigmaModel& model) {
    model.validate();
    return model.theta1.transpose() * model.phi;
}

double kld_of_sigma(const Eigen::VectorXd& sigma, const Eigen::VectorXd& mu) {
    if (sigma.size() != mu.size())
        throw std::invalid_argument("kld_of_sigma: sigma/mu length mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        const double s = sigma[i];
        if (!(s > 0.0))
            throw std::domain_error("kld_of_sigma: sigma_" + std::to_string(i) +
                                    " <= 0, log undefined");
        acc += -0.5 * (1.0 + 2.0 * std::log(s)) + 0.5 * s * s + 0.5 * mu[i] * mu[i];
    }
    return acc;
}

namespace {

// d KLD / d sigma_i = (sigma_i^2 - 1) / sigma_i; validated against sigma > 0.
Eigen::VectorXd kld_sigma_derivative(const Eigen::VectorXd& sigma) {
    Eigen::VectorXd out(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        const double s = sigma[i];
        if (!(s > 0.0))
            throw std::domain_error("kld gradient: sigma_" + std::to_string(i) +
                                    " <= 0");
        out[i] = (s * s - 1.0) / s;
    }
    return out;
}

} // namespace

Eigen::MatrixXd analytic_kld_gradient(const LinearSigmaModel& model,
                                      double beta) {
    const Eigen::VectorXd sigma = sigma_from_weights(model);
    const Eigen::VectorXd dk = kld_sigma_derivative(sigma);
    Eigen::MatrixXd grad(model.feature_dim(), model.latent_dim());
    for (Eigen::Index i = 0; i < grad.cols(); ++i)
        for (Eigen::Index k = 0; k < grad.rows(); ++k)
            grad(k, i) = beta * dk[i] * model.phi[k];
    return grad;
}

Eigen::MatrixXd finite_difference_kld_gradient(const LinearSigmaModel& model,
                                               double beta, double h) {
    model.validate();
    if (!(h > 0.0))
        throw std::invalid_argument("finite_difference_kld_gradient: h <= 0");
    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(model.latent_dim());
    Eigen::MatrixXd grad(model.feature_dim(), model.latent_dim());
    LinearSigmaModel probe = model;
    for (Eigen::Index i = 0; i < grad.cols(); ++i) {
        for (Eigen::Index k = 0; k < grad.rows(); ++k) {
            const double saved = probe.theta1(k, i);
            double plus = 0.0, minus = 0.0;
            try {
                probe.theta1(k, i) = saved + h;
                plus = kld_of_sigma(sigma_from_weights(probe), mu);
                probe.theta1(k, i) = saved - h;
                minus = kld_of_sigma(sigma_from_weights(probe), mu);
            } catch (const std::domain_error&) {
                probe.theta1(k, i) = saved;
                throw std::domain_error(
                    "finite difference at theta1(" + std::to_string(k) + "," +
                    std::to_string(i) + ") crosses sigma <= 0");
            }
            probe.theta1(k, i) = saved;
            grad(k, i) = (plus - minus) * beta / (2.0 * h);
        }
    }
    return grad;
}

double max_rel_gradient_error(
    const LinearSigmaModel& model, double beta, double h,
    const std::function<Eigen::MatrixXd(const LinearSigmaModel&, double)>&
        gradient_fn) {
    const Eigen::MatrixXd analytic = gradient_fn(model, beta);
    const Eigen::MatrixXd fd = finite_difference_kld_gradient(model, beta, h);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.cols(); ++i) {
        for (Eigen::Index k = 0; k < analytic.rows(); ++k) {
            const double denom = std::max(std::abs(analytic(k, i)), 1e-8);
            worst = std::max(worst, std::abs(analytic(k, i) - fd(k, i)) / denom);
        }
    }
    return worst;
}

GdTrace simulate_gd(const LinearSigmaModel& model, double beta, double alpha,
                    int steps) {
    model.validate();
    if (!(beta > 0.0) || !(alpha > 0.0) || steps < 1)
        throw std::invalid_argument("simulate_gd: beta, alpha, steps must be positive");

    LinearSigmaModel state = model;
    Eigen::VectorXd sigma = sigma_from_weights(state);
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (!(sigma[i] > 0.0))
            throw std::invalid_argument("simulate_gd: initial sigma must be > 0");

    GdTrace trace;
    trace.beta = beta;
    trace.alpha = alpha;
    trace.initial_sigma = sigma;
    trace.initial_kld =
        kld_of_sigma(sigma, Eigen::VectorXd::Zero(sigma.size()));
    trace.records.reserve(static_cast<std::size_t>(steps));

    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(sigma.size());
    for (int t = 1; t <= steps; ++t) {
        const Eigen::MatrixXd grad = analytic_kld_gradient(state, beta);
        state.theta1 -= alpha * grad;
        sigma = sigma_from_weights(state);
        for (Eigen::Index i = 0; i < sigma.size(); ++i)
            if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
                throw SimulationDiverged(
                    t, "simulate_gd: sigma_" + std::to_string(i) +
                           " left (0, inf) at step " + std::to_string(t));
        GdStep rec;
        rec.sigma = sigma;
        rec.kld = kld_of_sigma(sigma, mu);
        rec.grad_max = grad.cwiseAbs().maxCoeff();
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

std::string gd_trace_csv(const GdTrace& trace) {
    std::ostringstream os;
    os.precision(17);
    os << "step,kld,grad_max";
    for (Eigen::Index i = 0; i < trace.initial_sigma.size(); ++i)
        os << ",sigma_" << i;
    os << "\n0," << trace.initial_kld << ",0";
    for (Eigen::Index i = 0; i < trace.initial_sigma.size(); ++i)
        os << "," << trace.initial_sigma[i];
    os << "\n";
    for (std::size_t t = 0; t < trace.records.size(); ++t) {
        const GdStep& r = trace.records[t];
        os << (t + 1) << "," << r.kld << "," << r.grad_max;
        for (Eigen::Index i = 0; i < r.sigma.size(); ++i) os << "," << r.sigma[i];
        os << "\n";
    }
    return os.str();
}

} // namespace bvae
