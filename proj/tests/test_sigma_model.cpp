#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bvae/rng.hpp"
#include "bvae/sigma_model.hpp"
#include "bvae/verify.hpp"

using namespace bvae;

namespace {

LinearSigmaModel make_model(std::initializer_list<double> phi,
                            std::initializer_list<std::initializer_list<double>> theta) {
    LinearSigmaModel m;
    m.phi.resize(static_cast<Eigen::Index>(phi.size()));
    Eigen::Index k = 0;
    for (double p : phi) m.phi[k++] = p;
    const auto rows = static_cast<Eigen::Index>(theta.size());
    const auto cols = static_cast<Eigen::Index>(theta.begin()->size());
    m.theta1.resize(rows, cols);
    Eigen::Index r = 0;
    for (const auto& row : theta) {
        Eigen::Index c = 0;
        for (double v : row) m.theta1(r, c++) = v;
        ++r;
    }
    return m;
}

} // namespace

TEST_CASE("sigma_from_weights") {
    SUBCASE("identity weights with a basis feature vector") {
        LinearSigmaModel m;
        m.theta1 = Eigen::MatrixXd::Identity(3, 3);
        m.phi = Eigen::VectorXd::Zero(3);
        m.phi[0] = 1.0;
        const auto sigma = sigma_from_weights(m);
        CHECK(sigma[0] == 1.0);
        CHECK(sigma[1] == 0.0);
        CHECK(sigma[2] == 0.0);
    }
    SUBCASE("hand-evaluated 2x1 case") {
        const auto m = make_model({1.0, 2.0}, {{0.1}, {0.2}});
        CHECK(sigma_from_weights(m)[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("zero features give zero sigma") {
        auto m = make_model({0.0, 0.0}, {{0.3, 0.4}, {-0.2, 0.9}});
        const auto sigma = sigma_from_weights(m);
        CHECK(sigma[0] == 0.0);
        CHECK(sigma[1] == 0.0);
    }
}

TEST_CASE("kld_of_sigma") {
    CHECK(kld_of_sigma(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)) ==
          doctest::Approx(0.0).epsilon(1e-15));
    Eigen::VectorXd two(1), zero(1), half(1), one(1);
    two << 2.0;
    zero << 0.0;
    half << 0.5;
    one << 1.0;
    CHECK(kld_of_sigma(two, zero) ==
          doctest::Approx(0.5 * (4.0 - 1.0 - std::log(4.0))).epsilon(1e-12));
    CHECK(kld_of_sigma(half, one) ==
          doctest::Approx(0.5 * (0.25 - 1.0 - std::log(0.25)) + 0.5).epsilon(1e-12));
    CHECK(kld_of_sigma(half, one) == doctest::Approx(0.818147).epsilon(1e-6));

    Eigen::VectorXd bad(1);
    bad << -0.3;
    CHECK_THROWS_AS(kld_of_sigma(bad, zero), std::domain_error);
    bad << 0.0;
    CHECK_THROWS_AS(kld_of_sigma(bad, zero), std::domain_error);
}

TEST_CASE("analytic gradient") {
    SUBCASE("zero at sigma = 1") {
        LinearSigmaModel m;
        m.phi = Eigen::VectorXd::Constant(4, 0.25);
        m.theta1 = Eigen::MatrixXd::Constant(4, 2, 4.0 / 4.0); // sigma_i = 1
        CHECK(analytic_kld_gradient(m, 100.0).cwiseAbs().maxCoeff() <= 1e-14);
    }
    SUBCASE("linear in beta") {
        std::mt19937_64 eng(3);
        const auto m = random_sigma_model(eng, 6, 3, 0.1, 0.9);
        const auto g1 = analytic_kld_gradient(m, 1.0);
        const auto g100 = analytic_kld_gradient(m, 100.0);
        CHECK((g100 - 100.0 * g1).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("hand-evaluated 1x1 case: -3 beta") {
        const auto m = make_model({2.0}, {{0.25}});
        for (double beta : {1.0, 7.5, 100.0}) {
            const auto g = analytic_kld_gradient(m, beta);
            CHECK(g(0, 0) == doctest::Approx(-3.0 * beta).epsilon(1e-12));
        }
    }
    SUBCASE("domain error when a sigma is nonpositive") {
        const auto m = make_model({1.0}, {{-0.5}});
        CHECK_THROWS_AS(analytic_kld_gradient(m, 1.0), std::domain_error);
    }
}

TEST_CASE("finite differences confirm the analytic gradient") {
    SUBCASE("random models, relative tolerance 1e-5") {
        std::mt19937_64 eng(17);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const auto m = random_sigma_model(eng, 8, 4, 0.1, 0.9);
            const double beta = 1.0 + 99.0 * uniform01(eng);
            worst = std::max(worst, max_rel_gradient_error(
                                        m, beta, 1e-6,
                                        [](const LinearSigmaModel& model, double b) {
                                            return analytic_kld_gradient(model, b);
                                        }));
        }
        CHECK(worst <= 1e-5);
    }
    SUBCASE("zero-gradient case stays below 1e-6") {
        LinearSigmaModel m;
        m.phi = Eigen::VectorXd::Constant(2, 0.5);
        m.theta1 = Eigen::MatrixXd::Constant(2, 2, 1.0); // sigma = 1
        CHECK(finite_difference_kld_gradient(m, 1.0, 1e-6).cwiseAbs().maxCoeff() <=
              1e-6);
    }
    SUBCASE("beta linearity reproduced numerically") {
        const auto m = make_model({1.0, -0.5}, {{0.3, 0.2}, {-0.4, 0.1}});
        const auto f1 = finite_difference_kld_gradient(m, 1.0, 1e-6);
        const auto f10 = finite_difference_kld_gradient(m, 10.0, 1e-6);
        CHECK((f10 - 10.0 * f1).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("perturbation crossing sigma <= 0 names the entry") {
        // sigma = 5e-7: the +/- 1e-6 probe on theta crosses zero.
        const auto m = make_model({1.0}, {{5e-7}});
        CHECK_THROWS_WITH_AS(finite_difference_kld_gradient(m, 1.0, 1e-6),
                             doctest::Contains("theta1(0,0)"), std::domain_error);
    }
}

TEST_CASE("gradient checker catches an injected sign flip") {
    std::mt19937_64 eng(23);
    const auto m = random_sigma_model(eng, 5, 3, 0.2, 0.8);
    const double healthy = max_rel_gradient_error(
        m, 10.0, 1e-6, [](const LinearSigmaModel& model, double b) {
            return analytic_kld_gradient(model, b);
        });
    const double mutated = max_rel_gradient_error(
        m, 10.0, 1e-6, [](const LinearSigmaModel& model, double b) {
            return (-analytic_kld_gradient(model, b)).eval();
        });
    CHECK(healthy <= 1e-5);
    CHECK(mutated > 1.0);
}

TEST_CASE("simulate_gd") {
    SUBCASE("sigma = 1 is a fixed point") {
        LinearSigmaModel m;
        m.phi = Eigen::VectorXd::Constant(2, 0.5);
        m.theta1 = Eigen::MatrixXd::Constant(2, 3, 1.0);
        const auto trace = simulate_gd(m, 10.0, 0.01, 25);
        CHECK(trace.step_count() == 25);
        for (const GdStep& s : trace.records)
            CHECK((s.sigma.array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    SUBCASE("hand-iterated first step") {
        // theta=0.5, phi=1, beta=1, alpha=0.1: grad = (0.25-1)/0.5 = -1.5,
        // theta -> 0.65, sigma -> 0.65.
        const auto m = make_model({1.0}, {{0.5}});
        const auto trace = simulate_gd(m, 1.0, 0.1, 1);
        CHECK(trace.initial_sigma[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(trace.records[0].grad_max == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(trace.records[0].sigma[0] == doctest::Approx(0.65).epsilon(1e-12));
    }
    SUBCASE("beta=100 grows sigma faster than beta=1") {
        const auto m = make_model({1.0}, {{0.5}});
        const auto t1 = simulate_gd(m, 1.0, 1e-4, 50);
        const auto t100 = simulate_gd(m, 100.0, 1e-4, 50);
        for (int s = 0; s < 50; ++s) {
            if (t1.records[s].sigma[0] < 1.0 && t100.records[s].sigma[0] < 1.0)
                CHECK(t100.records[s].sigma[0] > t1.records[s].sigma[0]);
        }
        CHECK(t100.records[0].sigma[0] - t100.initial_sigma[0] >
              t1.records[0].sigma[0] - t1.initial_sigma[0]);
    }
    SUBCASE("monotone growth below 1, bounded overshoot") {
        std::mt19937_64 eng(31);
        for (int t = 0; t < 20; ++t) {
            const auto m = random_sigma_model(eng, 8, 4, 0.1, 0.9);
            const auto trace = simulate_gd(m, 100.0, 5e-5, 80);
            Eigen::VectorXd prev = trace.initial_sigma;
            for (const GdStep& s : trace.records) {
                for (Eigen::Index i = 0; i < prev.size(); ++i) {
                    if (prev[i] < 1.0) CHECK(s.sigma[i] >= prev[i]);
                    CHECK(s.sigma[i] <= 1.0 + 1e-9);
                }
                prev = s.sigma;
            }
        }
    }
    SUBCASE("divergence raises with the step index") {
        const auto m = make_model({1.0}, {{0.5}});
        try {
            simulate_gd(m, 100.0, 1.0, 10);
            FAIL("expected SimulationDiverged");
        } catch (const SimulationDiverged& e) {
            CHECK(e.step == 2);
        }
    }
    SUBCASE("nonpositive initial sigma rejected") {
        const auto m = make_model({1.0}, {{-0.2}});
        CHECK_THROWS_AS(simulate_gd(m, 1.0, 0.1, 5), std::invalid_argument);
    }
}

TEST_CASE("gd_trace_csv shape") {
    const auto m = make_model({1.0}, {{0.5}});
    const auto csv = gd_trace_csv(simulate_gd(m, 1.0, 0.1, 3));
    int lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 5); // header + step 0 + 3 steps
    CHECK(csv.rfind("step,kld,grad_max,sigma_0", 0) == 0);
}
