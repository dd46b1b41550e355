#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "bvae/gaussian.hpp"
#include "bvae/rng.hpp"

using namespace bvae;

TEST_CASE("reverse KLD closed form matches hand-evaluated values") {
    CHECK(kld_reverse_closed_form({{0.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kld_reverse_closed_form({{1.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.5).epsilon(1e-12));
    // sigma = 2: 0.5 * (4 - 1 - log 4)
    const double expected = 0.5 * (4.0 - 1.0 - std::log(4.0));
    CHECK(kld_reverse_closed_form({{0.0}, {std::log(4.0)}}) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.806853).epsilon(1e-6));
}

TEST_CASE("forward KLD closed form and asymmetry") {
    CHECK(kld_forward_closed_form({{0.0}, {0.0}}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kld_forward_closed_form({{1.0}, {0.0}}) == doctest::Approx(0.5).epsilon(1e-12));
    const DiagonalGaussian q{{0.0}, {std::log(4.0)}};
    const double fwd = kld_forward_closed_form(q);
    const double rev = kld_reverse_closed_form(q);
    CHECK(fwd == doctest::Approx(0.5 * (std::log(4.0) - 1.0 + 0.25)).epsilon(1e-12));
    CHECK(fwd == doctest::Approx(0.318147).epsilon(1e-5));
    CHECK(std::abs(fwd - rev) > 0.1);
    CHECK(fwd >= 0.0);
    CHECK(rev >= 0.0);
}

TEST_CASE("KLD input validation") {
    CHECK_THROWS_AS(kld_reverse_closed_form({{}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(kld_reverse_closed_form({{1.0}, {0.0, 0.0}}), std::invalid_argument);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(kld_reverse_closed_form({{nan}, {0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(kld_forward_closed_form({{0.0}, {nan}}), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(kld_reverse_closed_form({{inf}, {0.0}}), std::invalid_argument);
}

TEST_CASE("reverse KLD nonnegative, zero only at the prior") {
    std::mt19937_64 eng(7);
    for (int t = 0; t < 200; ++t) {
        const int d = 1 + static_cast<int>(eng() % 8);
        DiagonalGaussian q;
        for (int i = 0; i < d; ++i) {
            q.mu.push_back(-3.0 + 6.0 * uniform01(eng));
            q.log_variance.push_back(2.0 * std::log(0.2 + 2.8 * uniform01(eng)));
        }
        const double kld = kld_reverse_closed_form(q);
        CHECK(kld >= 0.0);
        if (kld < 1e-12) {
            for (double m : q.mu) CHECK(std::abs(m) < 1e-5);
            for (double lv : q.log_variance) CHECK(std::abs(lv) < 1e-5);
        }
    }
}

TEST_CASE("MC estimator agrees with the closed form") {
    SUBCASE("prior: every sample log-ratio is exactly zero") {
        const auto est = kld_reverse_mc({{0.0, 0.0}, {0.0, 0.0}}, 1000, 1);
        CHECK(std::abs(est.value) <= 3.0 * est.std_error + 1e-12);
    }
    SUBCASE("documented unit-variance example") {
        const auto est = kld_reverse_mc({{1.0, 0.0}, {0.0, 0.0}}, 100000, 2);
        CHECK(std::abs(est.value - 0.5) <= 3.0 * est.std_error);
    }
    SUBCASE("single sample is a finite log ratio") {
        const auto est = kld_reverse_mc({{1.0}, {std::log(2.0)}}, 1, 3);
        CHECK(std::isfinite(est.value));
        CHECK(est.n_samples == 1);
    }
    SUBCASE("within 3 standard errors on >= 95% of seeds") {
        int hits = 0;
        const int n_seeds = 100;
        std::mt19937_64 eng(11);
        for (int s = 0; s < n_seeds; ++s) {
            const int d = 1 + static_cast<int>(eng() % 8);
            DiagonalGaussian q;
            for (int i = 0; i < d; ++i) {
                q.mu.push_back(-3.0 + 6.0 * uniform01(eng));
                q.log_variance.push_back(2.0 * std::log(0.2 + 2.8 * uniform01(eng)));
            }
            const double exact = kld_reverse_closed_form(q);
            const auto est = kld_reverse_mc(q, 100000, 1000 + s);
            if (std::abs(est.value - exact) <= 3.0 * est.std_error) ++hits;
        }
        CHECK(hits >= 95);
    }
}

TEST_CASE("reparameterize") {
    const DiagonalGaussian q{{2.0}, {std::log(9.0)}};
    CHECK(reparameterize(q, {1.0}).z[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(reparameterize(q, {0.0}).z[0] == doctest::Approx(2.0).epsilon(1e-15));

    const DiagonalGaussian unit{{0.0, 0.0}, {0.0, 0.0}};
    const auto z = reparameterize(unit, {1.0, -1.0});
    CHECK(z.z[0] == 1.0);
    CHECK(z.z[1] == -1.0);

    CHECK_THROWS_AS(reparameterize(q, {1.0, 2.0}), std::invalid_argument);

    SUBCASE("linear in epsilon") {
        const DiagonalGaussian g{{0.3, -1.2}, {0.4, -0.8}};
        const std::vector<double> e1{0.7, -0.2}, e2{-1.1, 0.5};
        std::vector<double> sum{e1[0] + e2[0], e1[1] + e2[1]};
        const auto z0 = reparameterize(g, {0.0, 0.0});
        const auto za = reparameterize(g, e1);
        const auto zb = reparameterize(g, e2);
        const auto zs = reparameterize(g, sum);
        for (int i = 0; i < 2; ++i)
            CHECK(zs.z[i] - z0.z[i] ==
                  doctest::Approx((za.z[i] - z0.z[i]) + (zb.z[i] - z0.z[i])).epsilon(1e-12));
    }
}

TEST_CASE("mixture decomposition identity") {
    SUBCASE("identical components carry no information") {
        const DiagonalGaussian q{{0.5}, {0.2}};
        const auto r = mi_decomposition_check({q, q}, 20000, 5);
        CHECK(std::abs(r.mi.value) <= 1e-12);
        CHECK(std::abs(r.aggregate_kld.value - r.lhs) <=
              3.0 * r.aggregate_kld.std_error);
    }
    SUBCASE("well-separated pair: mi is log 2, residual vanishes") {
        const std::vector<DiagonalGaussian> pair{{{-3.0}, {0.0}}, {{3.0}, {0.0}}};
        const auto r = mi_decomposition_check(pair, 100000, 6);
        CHECK(std::abs(r.residual) <= 3.0 * r.residual_std_error);
        CHECK(r.mi.value == doctest::Approx(std::log(2.0)).epsilon(0.01));
        CHECK(r.aggregate_kld.value >= -3.0 * r.aggregate_kld.std_error);
        CHECK(r.mi.value >= -3.0 * r.mi.std_error);
    }
    SUBCASE("residual shrinks with more samples") {
        const std::vector<DiagonalGaussian> pair{{{-1.0, 0.5}, {0.1, -0.3}},
                                                 {{1.0, -0.5}, {-0.2, 0.4}}};
        const auto small = mi_decomposition_check(pair, 2000, 7);
        const auto large = mi_decomposition_check(pair, 200000, 7);
        CHECK(large.residual_std_error < small.residual_std_error);
        CHECK(std::abs(large.residual) <= 3.0 * large.residual_std_error);
    }
    SUBCASE("mismatched dimensions rejected") {
        CHECK_THROWS_AS(
            mi_decomposition_check({{{0.0}, {0.0}}, {{0.0, 0.0}, {0.0, 0.0}}}, 10, 8),
            std::invalid_argument);
        CHECK_THROWS_AS(mi_decomposition_check({{{0.0}, {0.0}}}, 10, 8),
                        std::invalid_argument);
    }
}
