#include "bvae/verify.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "bvae/gaussian.hpp"
#include "bvae/rng.hpp"

namespace bvae {

bool VerifyReport::all_pass() const {
    for (const CheckResult& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string VerifyReport::table() const {
    std::ostringstream os;
    char buf[256];
    os << "check                                    result   observed      limit\n";
    os << "---------------------------------------------------------------------\n";
    for (const CheckResult& c : checks) {
        std::snprintf(buf, sizeof(buf), "%-40s %-6s %12.4g %10.4g  %s\n",
                      c.name.c_str(), c.pass ? "PASS" : "FAIL", c.observed,
                      c.limit, c.detail.c_str());
        os << buf;
    }
    os << (all_pass() ? "all checks passed\n" : "CHECK FAILURES PRESENT\n");
    return os.str();
}

LinearSigmaModel random_sigma_model(std::mt19937_64& eng, int max_m, int max_d,
                                    double sigma_lo, double sigma_hi) {
    const int m = 1 + static_cast<int>(eng() % static_cast<std::uint64_t>(max_m));
    const int d = 1 + static_cast<int>(eng() % static_cast<std::uint64_t>(max_d));
    LinearSigmaModel model;
    model.phi.resize(m);
    for (int k = 0; k < m; ++k) {
        // |phi_k| in [0.1, 1]: bounded away from zero so gradient entries
        // stay comparable against a relative tolerance.
        const double mag = 0.1 + 0.9 * uniform01(eng);
        model.phi[k] = (eng() & 1) ? mag : -mag;
    }
    // One free direction per column scaled so sigma_i lands where requested.
    const double norm2 = model.phi.squaredNorm();
    model.theta1.resize(m, d);
    for (int i = 0; i < d; ++i) {
        const double target = sigma_lo + (sigma_hi - sigma_lo) * uniform01(eng);
        for (int k = 0; k < m; ++k)
            model.theta1(k, i) = model.phi[k] * target / norm2;
    }
    return model;
}

namespace {

void add_check(VerifyReport& report, const std::string& name, bool pass,
               double observed, double limit, const std::string& detail = "") {
    report.checks.push_back({name, pass, observed, limit, detail});
}

DiagonalGaussian random_gaussian(std::mt19937_64& eng, int max_d) {
    const int d = 1 + static_cast<int>(eng() % static_cast<std::uint64_t>(max_d));
    DiagonalGaussian q;
    q.mu.resize(static_cast<std::size_t>(d));
    q.log_variance.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        q.mu[static_cast<std::size_t>(i)] = -3.0 + 6.0 * uniform01(eng);
        const double sigma = 0.2 + 2.8 * uniform01(eng);
        q.log_variance[static_cast<std::size_t>(i)] = 2.0 * std::log(sigma);
    }
    return q;
}

} // namespace

VerifyReport run_math_checks(const MathCheckOptions& options) {
    VerifyReport report;
    std::mt19937_64 eng(mix_seed(options.seed, 0xc4ec));

    // -- analytic gradient vs central finite differences -------------------
    double worst_grad_err = 0.0;
    for (int t = 0; t < options.gradient_trials; ++t) {
        const auto model = random_sigma_model(eng, 8, 4, 0.1, 0.9);
        const double beta = (t % 3 == 0) ? 100.0 : 1.0 + 9.0 * uniform01(eng);
        worst_grad_err = std::max(
            worst_grad_err,
            max_rel_gradient_error(model, beta, 1e-6, options.gradient_fn));
    }
    add_check(report, "gradient analytic vs finite difference",
              worst_grad_err <= options.gradient_tolerance, worst_grad_err,
              options.gradient_tolerance,
              std::to_string(options.gradient_trials) + " random models");

    // -- matrix-calculus result == stacked per-entry scalars ---------------
    {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const auto model = random_sigma_model(eng, 8, 4, 0.1, 0.9);
            const double beta = 1.0 + 99.0 * uniform01(eng);
            const Eigen::MatrixXd matrix_form = options.gradient_fn(model, beta);
            const Eigen::VectorXd sigma = sigma_from_weights(model);
            for (Eigen::Index i = 0; i < matrix_form.cols(); ++i)
                for (Eigen::Index k = 0; k < matrix_form.rows(); ++k) {
                    const double scalar =
                        beta * (sigma[i] * sigma[i] - 1.0) / sigma[i] * model.phi[k];
                    worst = std::max(worst, std::abs(scalar - matrix_form(k, i)));
                }
        }
        add_check(report, "matrix gradient == elementwise gradient",
                  worst <= 1e-12, worst, 1e-12);
    }

    // -- beta linearity ------------------------------------------------------
    {
        const auto model = random_sigma_model(eng, 6, 3, 0.1, 0.9);
        const Eigen::MatrixXd g1 = options.gradient_fn(model, 1.0);
        const Eigen::MatrixXd g100 = options.gradient_fn(model, 100.0);
        const double worst = (g100 - 100.0 * g1).cwiseAbs().maxCoeff();
        add_check(report, "gradient linear in beta (100x)", worst <= 1e-10,
                  worst, 1e-10);
    }

    // -- closed-form reverse KLD vs MC estimate ------------------------------
    {
        int failures = 0;
        double worst_pull = 0.0;
        for (int t = 0; t < options.kld_mc_trials; ++t) {
            const auto q = random_gaussian(eng, 8);
            const double exact = kld_reverse_closed_form(q);
            const auto mc =
                kld_reverse_mc(q, options.mc_samples, mix_seed(options.seed, 0x3c, t));
            const double pull =
                std::abs(mc.value - exact) / std::max(mc.std_error, 1e-300);
            worst_pull = std::max(worst_pull, pull);
            if (pull > 3.0) ++failures;
        }
        add_check(report, "reverse KLD closed form vs MC (3 s.e.)",
                  failures == 0, worst_pull, 3.0,
                  std::to_string(options.kld_mc_trials) + " gaussians");
    }

    // -- forward vs reverse asymmetry on the documented example --------------
    {
        DiagonalGaussian q{{0.0}, {std::log(4.0)}};
        const double rev = kld_reverse_closed_form(q);
        const double fwd = kld_forward_closed_form(q);
        const bool pass = std::abs(rev - 0.5 * (4.0 - 1.0 - std::log(4.0))) < 1e-12 &&
                          std::abs(fwd - 0.5 * (std::log(4.0) - 1.0 + 0.25)) < 1e-12 &&
                          std::abs(fwd - rev) > 0.1 && rev >= 0.0 && fwd >= 0.0;
        add_check(report, "KLD asymmetry (sigma=2 example)", pass,
                  std::abs(fwd - rev), 0.1, "both nonnegative, gap > 0.1 nats");
    }

    // -- mixture decomposition residual --------------------------------------
    {
        std::vector<DiagonalGaussian> two{DiagonalGaussian{{-3.0}, {0.0}},
                                          DiagonalGaussian{{3.0}, {0.0}}};
        const auto r2 =
            mi_decomposition_check(two, options.mc_samples, mix_seed(options.seed, 0xa9));
        const double pull2 =
            std::abs(r2.residual) / std::max(r2.residual_std_error, 1e-300);
        add_check(report, "mixture identity residual (2 components)",
                  pull2 <= 3.0, pull2, 3.0,
                  "mi=" + std::to_string(r2.mi.value));

        std::mt19937_64 eng10(mix_seed(options.seed, 0xa10));
        std::vector<DiagonalGaussian> ten;
        for (int i = 0; i < 10; ++i) {
            DiagonalGaussian q;
            for (int j = 0; j < 2; ++j) {
                q.mu.push_back(-2.0 + 4.0 * uniform01(eng10));
                const double sigma = 0.5 + 1.5 * uniform01(eng10);
                q.log_variance.push_back(2.0 * std::log(sigma));
            }
            ten.push_back(q);
        }
        const auto r10 =
            mi_decomposition_check(ten, options.mc_samples, mix_seed(options.seed, 0xa11));
        const double pull10 =
            std::abs(r10.residual) / std::max(r10.residual_std_error, 1e-300);
        add_check(report, "mixture identity residual (10 components)",
                  pull10 <= 3.0, pull10, 3.0);
        add_check(report, "mixture MI and aggregate KLD nonnegative",
                  r10.mi.value >= -3.0 * r10.mi.std_error &&
                      r10.aggregate_kld.value >= -3.0 * r10.aggregate_kld.std_error,
                  std::min(r10.mi.value, r10.aggregate_kld.value), 0.0);
    }

    // -- sigma growth + beta dominance under plain GD -------------------------
    {
        int violations = 0;
        int dominance_failures = 0;
        // alpha small enough that sigma cannot overshoot past 1 at beta=100
        // with |phi| <= 1, m <= 8: alpha * beta * |phi|^2 * (1+sigma)/sigma <= 1.
        const double alpha = 5e-5;
        for (int t = 0; t < options.growth_trials; ++t) {
            const auto model = random_sigma_model(eng, 8, 4, 0.1, 0.9);
            const auto trace1 = simulate_gd(model, 1.0, alpha, options.growth_steps);
            const auto trace100 = simulate_gd(model, 100.0, alpha, options.growth_steps);
            for (const auto* trace : {&trace1, &trace100}) {
                Eigen::VectorXd prev = trace->initial_sigma;
                for (const GdStep& step : trace->records) {
                    for (Eigen::Index i = 0; i < prev.size(); ++i)
                        if (prev[i] < 1.0 && step.sigma[i] < prev[i]) ++violations;
                    prev = step.sigma;
                }
            }
            const Eigen::VectorXd inc1 =
                trace1.records.front().sigma - trace1.initial_sigma;
            const Eigen::VectorXd inc100 =
                trace100.records.front().sigma - trace100.initial_sigma;
            for (Eigen::Index i = 0; i < inc1.size(); ++i)
                if (!(inc100[i] > inc1[i])) ++dominance_failures;
        }
        add_check(report, "sigma non-decreasing under GD (sigma < 1)",
                  violations == 0, static_cast<double>(violations), 0.0,
                  std::to_string(options.growth_trials) + " trials");
        add_check(report, "beta=100 first-step increase dominates beta=1",
                  dominance_failures == 0, static_cast<double>(dominance_failures),
                  0.0);
    }

    // -- fixed point at sigma = 1 -------------------------------------------
    {
        LinearSigmaModel unit;
        unit.phi = Eigen::VectorXd::Constant(2, 0.5);
        unit.theta1 = Eigen::MatrixXd::Constant(2, 2, 1.0);
        const auto trace = simulate_gd(unit, 100.0, 1e-3, 10);
        double worst = 0.0;
        for (const GdStep& s : trace.records)
            worst = std::max(worst, (s.sigma.array() - 1.0).abs().maxCoeff());
        add_check(report, "sigma = 1 is a GD fixed point", worst <= 1e-12,
                  worst, 1e-12);
    }

    return report;
}

std::vector<std::pair<std::string, std::string>> verify_trace_csvs(
    std::uint64_t seed) {
    std::mt19937_64 eng(mix_seed(seed, 0x7c5));
    const auto model = random_sigma_model(eng, 4, 3, 0.2, 0.8);
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("gd_trace_beta1",
                     gd_trace_csv(simulate_gd(model, 1.0, 5e-5, 200)));
    out.emplace_back("gd_trace_beta100",
                     gd_trace_csv(simulate_gd(model, 100.0, 5e-5, 200)));
    return out;
}

} // namespace bvae
