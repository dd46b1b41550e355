#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bvae/verify.hpp"

using namespace bvae;

namespace {

MathCheckOptions fast_options() {
    MathCheckOptions opt;
    opt.gradient_trials = 25;
    opt.kld_mc_trials = 10;
    opt.mc_samples = 20000;
    opt.growth_trials = 10;
    opt.growth_steps = 40;
    return opt;
}

} // namespace

TEST_CASE("all math checks pass on a fresh run") {
    const auto report = run_math_checks(fast_options());
    for (const CheckResult& c : report.checks) {
        INFO(c.name, ": observed=", c.observed, " limit=", c.limit);
        CHECK(c.pass);
    }
    CHECK(report.all_pass());
    CHECK(report.checks.size() >= 9);
}

TEST_CASE("report lists the gradient error below 1e-5") {
    const auto report = run_math_checks(fast_options());
    bool found = false;
    for (const CheckResult& c : report.checks) {
        if (c.name.find("finite difference") == std::string::npos) continue;
        found = true;
        CHECK(c.observed <= 1e-5);
        CHECK(c.limit == 1e-5);
    }
    CHECK(found);
}

TEST_CASE("an injected sign flip is reported as a failure") {
    MathCheckOptions opt = fast_options();
    opt.gradient_fn = [](const LinearSigmaModel& m, double beta) {
        return (-analytic_kld_gradient(m, beta)).eval();
    };
    const auto report = run_math_checks(opt);
    CHECK_FALSE(report.all_pass());
    bool gradient_failed = false;
    for (const CheckResult& c : report.checks)
        if (c.name.find("finite difference") != std::string::npos && !c.pass)
            gradient_failed = true;
    CHECK(gradient_failed);
    CHECK(report.table().find("FAIL") != std::string::npos);
}

TEST_CASE("table formatting marks passes") {
    const auto report = run_math_checks(fast_options());
    const std::string table = report.table();
    CHECK(table.find("PASS") != std::string::npos);
    CHECK(table.find("all checks passed") != std::string::npos);
}

TEST_CASE("trace CSVs come as a beta pair") {
    const auto traces = verify_trace_csvs(42);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].first == "gd_trace_beta1");
    CHECK(traces[1].first == "gd_trace_beta100");
    for (const auto& [name, csv] : traces)
        CHECK(csv.rfind("step,kld,grad_max", 0) == 0);
}
