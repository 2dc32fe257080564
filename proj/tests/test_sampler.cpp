#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/sampler.hpp"
#include "test_support.hpp"

using namespace liftkit;

namespace {

// stacks one eps for all hypotheses: the true-noise oracle denoiser
BatchDenoiseFn oracle_denoiser(const Coords3& eps_true) {
    return [eps_true](const Matd& y, int) -> Matd {
        const int J = static_cast<int>(eps_true.rows());
        const int H = static_cast<int>(y.rows()) / J;
        Matd out(y.rows(), 3);
        for (int h = 0; h < H; ++h) out.middleRows(h * J, J) = eps_true;
        return out;
    };
}

}  // namespace

TEST_CASE("hypothesis initialization") {
    SUBCASE("deterministic per seed") {
        const auto a = init_hypotheses(6, 5, 42);
        const auto b = init_hypotheses(6, 5, 42);
        REQUIRE(a.size() == 6);
        for (int h = 0; h < 6; ++h) CHECK(a[h] == b[h]);
        const auto c = init_hypotheses(6, 5, 43);
        CHECK(a[0] != c[0]);
    }
    SUBCASE("smaller H is a prefix of larger H") {
        const auto small = init_hypotheses(3, 4, 7);
        const auto large = init_hypotheses(10, 4, 7);
        for (int h = 0; h < 3; ++h) CHECK(small[h] == large[h]);
    }
    SUBCASE("unit gaussian moments") {
        const int H = 10000, J = 8;
        const auto draws = init_hypotheses(H, J, 11);
        Coords3 mean = Coords3::Zero(J, 3), sq = Coords3::Zero(J, 3);
        for (const auto& p : draws) {
            mean += p;
            sq += p.cwiseProduct(p);
        }
        mean /= H;
        sq /= H;
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c) {
                CHECK(std::abs(mean(j, c)) < 0.03);
                CHECK(std::abs(std::sqrt(sq(j, c) - mean(j, c) * mean(j, c)) - 1.0) < 0.02);
            }
    }
    SUBCASE("minimal case") {
        const auto one = init_hypotheses(1, 3, 5);
        CHECK(one.size() == 1);
        CHECK(one[0].rows() == 3);
        CHECK(one[0].allFinite());
        CHECK_THROWS_AS(init_hypotheses(0, 3, 5), ConfigError);
    }
}

TEST_CASE("ddim update") {
    const auto schedule = build_schedule("linear", 100, 1e-3, 0.05);
    Rng rng(3);
    const Matd y = test::random_pose(4, rng);

    SUBCASE("literal variant with zero predicted noise is the identity") {
        const Matd out = ddim_update(schedule, y, 50, 40, Matd::Zero(4, 3), "literal");
        CHECK(out == y);
    }
    SUBCASE("equal timesteps are rejected") {
        CHECK_THROWS_AS(ddim_update(schedule, y, 50, 50, Matd::Zero(4, 3), "ddim"), ConfigError);
        CHECK_THROWS_AS(ddim_update(schedule, y, 40, 50, Matd::Zero(4, 3), "ddim"), ConfigError);
        CHECK_THROWS_AS(ddim_update(schedule, y, 101, 50, Matd::Zero(4, 3), "ddim"), ConfigError);
        CHECK_THROWS_AS(ddim_update(schedule, y, 50, -1, Matd::Zero(4, 3), "ddim"), ConfigError);
        CHECK_THROWS_AS(ddim_update(schedule, y, 50, 40, Matd::Zero(4, 3), "euler"), ConfigError);
    }
    SUBCASE("one oracle step to t=0 recovers y0 analytically") {
        const Coords3 y0 = test::random_pose(4, rng);
        const Coords3 eps = test::random_pose(4, rng);
        for (const int t : {1, 13, 60, 100}) {
            const Matd y_t = forward_sample(schedule, y0, t, eps);
            const Matd rec = ddim_update(schedule, y_t, t, 0, eps, "ddim");
            CHECK((rec - y0).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("oracle inversion over the full reverse chain") {
    const auto schedule = build_schedule("linear", 1000);
    Rng rng(17);
    for (const int K : {10, 20, 50}) {
        const Coords3 y0 = test::random_pose(8, rng);
        const Coords3 eps = test::random_pose(8, rng);
        const Matd y_T = forward_sample(schedule, y0, 1000, eps);

        Matd y = y_T;
        const auto steps = spacing(1000, K);
        for (size_t k = 0; k < steps.size(); ++k) {
            const int t_next = k + 1 < steps.size() ? steps[k + 1] : 0;
            y = ddim_step(oracle_denoiser(eps), schedule, y, steps[k], t_next, "ddim");
        }
        const double rel = (y - y0).norm() / y0.norm();
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("sample_hypotheses") {
    const auto schedule = build_schedule("linear", 200, 1e-3, 0.03);
    // a nonlinear but hypothesis-local denoiser; coupling across hypotheses
    // would show up as prefix mismatches
    const BatchDenoiseFn fn = [](const Matd& y, int t) -> Matd {
        return (y.array() * 0.2 + 0.01 * t / 200.0).tanh().matrix();
    };

    SUBCASE("bitwise deterministic") {
        SamplerConfig cfg{4, 10, "ddim", 99, 0};
        const auto a = sample_hypotheses(fn, schedule, 5, cfg);
        const auto b = sample_hypotheses(fn, schedule, 5, cfg);
        REQUIRE(a.size() == 4);
        for (int h = 0; h < 4; ++h) CHECK(a[h] == b[h]);
    }

    SUBCASE("hypotheses are independent: smaller H is a prefix of larger H") {
        SamplerConfig small{2, 10, "ddim", 7, 0};
        SamplerConfig large{6, 10, "ddim", 7, 0};
        const auto a = sample_hypotheses(fn, schedule, 5, small);
        const auto b = sample_hypotheses(fn, schedule, 5, large);
        for (int h = 0; h < 2; ++h) CHECK((a[h] - b[h]).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("identical initializations give identical outputs") {
        const auto schedule2 = build_schedule("linear", 100, 1e-3, 0.05);
        Rng rng(5);
        const Coords3 init = test::random_pose(4, rng);
        Matd y(8, 3);
        y.topRows(4) = init;
        y.bottomRows(4) = init;
        const auto steps = spacing(100, 5);
        for (size_t k = 0; k < steps.size(); ++k) {
            const int t_next = k + 1 < steps.size() ? steps[k + 1] : 0;
            y = ddim_step(fn, schedule2, y, steps[k], t_next, "ddim");
        }
        CHECK(y.topRows(4) == y.bottomRows(4));
    }

    SUBCASE("K > T is rejected") {
        SamplerConfig cfg{2, 300, "ddim", 1, 0};
        CHECK_THROWS_AS(sample_hypotheses(fn, schedule, 5, cfg), ConfigError);
    }

    SUBCASE("output is finite for a finite denoiser") {
        SamplerConfig cfg{3, 20, "literal", 123, 0};
        for (const auto& p : sample_hypotheses(fn, schedule, 5, cfg)) CHECK(p.allFinite());
    }
}

TEST_CASE("sample_frame re-centers and rescales") {
    const auto schedule = build_schedule("linear", 100, 1e-3, 0.05);
    DenoiserConfig mc;
    mc.levels = 2;
    mc.dim = 8;
    mc.heads = 2;
    mc.p2c_blocks = 1;
    mc.j2j_blocks = 1;
    const Denoiser model(mc);
    Rng rng(9);
    const auto F = test::random_features(2, 6, 8, rng);

    SamplerConfig cfg{3, 10, "ddim", 77, 0};
    const HypothesisSet hs = sample_frame(model, schedule, F, "frame0", cfg, 1000.0);
    CHECK(hs.frame_id == "frame0");
    CHECK(hs.count() == 3);
    CHECK(hs.joints() == 6);
    CHECK(hs.config.total_steps == 100);
    for (const auto& p : hs.poses) {
        CHECK(p.row(0).cwiseAbs().maxCoeff() == 0.0);  // root at origin
        CHECK(p.allFinite());
    }
    // deterministic end to end
    const HypothesisSet again = sample_frame(model, schedule, F, "frame0", cfg, 1000.0);
    for (int h = 0; h < 3; ++h) CHECK(hs.poses[h] == again.poses[h]);
}
