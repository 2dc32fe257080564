#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"
#include "liftkit/schedule.hpp"

using namespace liftkit;

namespace {

// constant-beta schedule via the public builder
DiffusionSchedule const_beta(int T, double beta) {
    return build_schedule("linear", T, beta, beta);
}

}  // namespace

TEST_CASE("schedule construction") {
    SUBCASE("constant beta 0.1, T=3: alpha_bar is the direct product") {
        const auto s = const_beta(3, 0.1);
        CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-12));
        CHECK(s.alpha_bar(3) == doctest::Approx(0.729).epsilon(1e-12));
    }
    SUBCASE("single step") {
        const auto s = build_schedule("linear", 1, 0.02, 0.4);
        CHECK(s.alpha_bar(1) == doctest::Approx(1.0 - 0.02).epsilon(1e-12));
    }
    SUBCASE("posterior beta via Bayes at t=2") {
        // (1 - 0.9) / (1 - 0.81) * 0.1, evaluated by hand
        const auto s = const_beta(3, 0.1);
        CHECK(s.posterior_beta(2) == doctest::Approx(0.0526315789473684).epsilon(1e-10));
        CHECK(s.posterior_beta(1) == doctest::Approx(0.1).epsilon(1e-12));  // defined as beta_1
    }
    SUBCASE("default linear range") {
        const auto s = build_schedule("linear", 1000);
        CHECK(s.betas.front() == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(s.betas.back() == doctest::Approx(0.02).epsilon(1e-12));
        CHECK(s.terminal_gaussian_ok());
        double prev = 1.0;
        bool decreasing = true, finite = true;
        for (int t = 1; t <= 1000; ++t) {
            decreasing = decreasing && s.alpha_bar(t) < prev;
            finite = finite && std::isfinite(s.alpha_bar(t)) && std::isfinite(s.posterior_beta(t));
            prev = s.alpha_bar(t);
        }
        CHECK(decreasing);
        CHECK(finite);
    }
    SUBCASE("cosine schedule satisfies the same invariants") {
        const auto s = build_schedule("cosine", 500);
        s.validate();
        CHECK(s.terminal_gaussian_ok());
        for (const double b : s.betas) CHECK((b > 0.0 && b < 1.0));
    }
    SUBCASE("invalid ranges are rejected") {
        CHECK_THROWS_AS(build_schedule("linear", 0), ConfigError);
        CHECK_THROWS_AS(build_schedule("linear", 10, 0.0, 0.02), ConfigError);
        CHECK_THROWS_AS(build_schedule("linear", 10, 0.3, 0.2), ConfigError);
        CHECK_THROWS_AS(build_schedule("linear", 10, 0.1, 1.0), ConfigError);
        CHECK_THROWS_AS(build_schedule("quadratic", 10), ConfigError);
    }
    SUBCASE("short schedules keep a non-gaussian terminal flag") {
        const auto s = const_beta(3, 0.1);
        CHECK_FALSE(s.terminal_gaussian_ok());
    }
}

TEST_CASE("forward sampling closed form") {
    const auto s = const_beta(10, 0.05);
    Coords3 y0(2, 3);
    y0 << 1.0, -2.0, 0.5, 3.0, 0.0, -1.0;

    SUBCASE("zero noise scales the signal") {
        const Coords3 eps = Coords3::Zero(2, 3);
        const Coords3 y5 = forward_sample(s, y0, 5, eps);
        CHECK((y5 - std::sqrt(s.alpha_bar(5)) * y0).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("zero signal scales the noise") {
        Coords3 eps(2, 3);
        eps << 0.3, 1.0, -0.2, 0.0, 2.0, -1.5;
        const Coords3 y7 = forward_sample(s, Coords3::Zero(2, 3), 7, eps);
        CHECK((y7 - std::sqrt(1.0 - s.alpha_bar(7)) * eps).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("timestep bounds") {
        const Coords3 eps = Coords3::Zero(2, 3);
        CHECK_THROWS_AS(forward_sample(s, y0, 0, eps), ConfigError);
        CHECK_THROWS_AS(forward_sample(s, y0, 11, eps), ConfigError);
    }
    SUBCASE("monte carlo moments match the closed form") {
        Rng rng(99);
        const double x0 = 1.7;
        const int n = 100000, t = 6;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = forward_sample_scalar(s, x0, t, rng.gaussian());
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / n;
        const double stddev = std::sqrt(sumsq / n - mean * mean);
        CHECK(mean == doctest::Approx(std::sqrt(s.alpha_bar(t)) * x0).epsilon(0.01));
        CHECK(stddev == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t))).epsilon(0.01));
    }
}

TEST_CASE("posterior parameters") {
    const auto s = const_beta(5, 0.1);

    SUBCASE("zero inputs give zero mean") {
        const auto p = posterior_params(s, Coords3::Zero(2, 3), Coords3::Zero(2, 3), 3);
        CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
        CHECK(p.variance > 0.0);
    }
    SUBCASE("scalar evaluation at t=2 matches the hand-derived coefficients") {
        // both coefficients equal sqrt(0.9)*0.1/0.19; their sum is 0.998614019,
        // slightly below 1 because the chain contracts toward the origin
        double mean = 0.0, var = 0.0;
        posterior_params_scalar(s, 1.0, 1.0, 2, mean, var);
        CHECK(mean == doctest::Approx(0.9986139979479094).epsilon(1e-9));
        CHECK(var == doctest::Approx(0.0526315789473684).epsilon(1e-9));
    }
    SUBCASE("variance partition identity holds at every t") {
        // beta_t + alpha_t (1 - abar_{t-1}) = 1 - abar_t, brute force over t
        for (const double beta : {0.03, 0.1, 0.25}) {
            const auto sc = const_beta(64, beta);
            for (int t = 1; t <= 64; ++t) {
                const double lhs = sc.beta(t) + sc.alpha(t) * (1.0 - sc.alpha_bar(t - 1));
                CHECK(std::abs(lhs - (1.0 - sc.alpha_bar(t))) < 1e-12);
            }
        }
    }
    SUBCASE("posterior mean coefficients match an independent evaluation") {
        const auto sc = build_schedule("linear", 100, 1e-3, 0.05);
        Rng rng(7);
        for (int t = 1; t <= 100; t += 7) {
            const double y0 = rng.gaussian(), yt = rng.gaussian();
            double mean = 0.0, var = 0.0;
            posterior_params_scalar(sc, yt, y0, t, mean, var);
            const double abar_prev = t == 1 ? 1.0 : sc.alpha_bar(t - 1);
            const double expected =
                std::sqrt(abar_prev) * sc.beta(t) / (1.0 - sc.alpha_bar(t)) * y0 +
                std::sqrt(sc.alpha(t)) * (1.0 - abar_prev) / (1.0 - sc.alpha_bar(t)) * yt;
            CHECK(mean == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("t=1 collapses onto y0") {
        double mean = 0.0, var = 0.0;
        posterior_params_scalar(s, -4.0, 2.5, 1, mean, var);
        CHECK(mean == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(var == doctest::Approx(s.beta(1)).epsilon(1e-12));
    }
    SUBCASE("timestep bounds") {
        CHECK_THROWS_AS(posterior_params(s, Coords3::Zero(1, 3), Coords3::Zero(1, 3), 0),
                        ConfigError);
        CHECK_THROWS_AS(posterior_params(s, Coords3::Zero(1, 3), Coords3::Zero(1, 3), 6),
                        ConfigError);
    }
}

TEST_CASE("sequential chain agrees with the closed-form marginal") {
    // compose single-step transitions and compare moments, z-test at 3 sigma
    const int T = 100, n = 20000;
    const double beta = 0.01, x0 = 2.0;
    const auto s = const_beta(T, beta);
    Rng rng(1234);
    for (const int t_star : {10, 50, 100}) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = x0;
            for (int t = 1; t <= t_star; ++t)
                x = std::sqrt(1.0 - s.beta(t)) * x + std::sqrt(s.beta(t)) * rng.gaussian();
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        const double ref_mean = std::sqrt(s.alpha_bar(t_star)) * x0;
        const double ref_var = 1.0 - s.alpha_bar(t_star);
        const double se_mean = std::sqrt(ref_var / n);
        const double se_var = ref_var * std::sqrt(2.0 / n);
        CHECK(std::abs(mean - ref_mean) < 3.0 * se_mean);
        CHECK(std::abs(var - ref_var) < 3.0 * se_var);
    }
}

TEST_CASE("posterior resampling reproduces the t-1 marginal") {
    const int T = 50, n = 20000;
    const auto s = const_beta(T, 0.04);
    const double x0 = 1.2;
    Rng rng(555);
    for (const int t : {2, 20, 50}) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double xt = forward_sample_scalar(s, x0, t, rng.gaussian());
            double mean = 0.0, var = 0.0;
            posterior_params_scalar(s, xt, x0, t, mean, var);
            const double prev = mean + std::sqrt(var) * rng.gaussian();
            sum += prev;
            sumsq += prev * prev;
        }
        const double mean = sum / n;
        const double stddev = std::sqrt(sumsq / n - mean * mean);
        const double ref_mean = std::sqrt(s.alpha_bar(t - 1)) * x0;
        const double ref_std = std::sqrt(1.0 - s.alpha_bar(t - 1));
        CHECK(mean == doctest::Approx(ref_mean).epsilon(0.01));
        CHECK(stddev == doctest::Approx(ref_std).epsilon(0.01));
    }
}

TEST_CASE("reverse-loop timestep spacing") {
    SUBCASE("T=1000, K=20 counts down from T in T/K strides") {
        const auto t = spacing(1000, 20);
        REQUIRE(t.size() == 20);
        for (int k = 0; k < 20; ++k) CHECK(t[k] == 1000 * (20 - k) / 20);
        CHECK(t.front() == 1000);
        CHECK(t.back() == 50);
    }
    SUBCASE("full schedule") {
        const auto t = spacing(10, 10);
        REQUIRE(t.size() == 10);
        for (int k = 0; k < 10; ++k) CHECK(t[k] == 10 - k);
    }
    SUBCASE("single step") {
        const auto t = spacing(1000, 1);
        REQUIRE(t.size() == 1);
        CHECK(t[0] == 1000);
    }
    SUBCASE("K > T rejected") {
        CHECK_THROWS_AS(spacing(10, 11), ConfigError);
        CHECK_THROWS_AS(spacing(10, 0), ConfigError);
    }
    SUBCASE("rounding collisions keep the sequence strictly decreasing") {
        for (int T = 2; T <= 12; ++T)
            for (int K = 1; K <= T; ++K) {
                const auto t = spacing(T, K);
                CHECK(t.front() == T);
                for (size_t i = 1; i < t.size(); ++i) CHECK(t[i] < t[i - 1]);
                CHECK(t.back() >= 1);
            }
    }
}
