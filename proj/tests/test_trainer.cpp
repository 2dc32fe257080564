#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "liftkit/checkpoint.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/trainer.hpp"
#include "test_support.hpp"

using namespace liftkit;

namespace {

// three-joint chain for fast toy training
SkeletonPreset chain3() {
    SkeletonPreset p;
    p.spec.name = "chain3";
    p.spec.joint_count = 3;
    p.spec.parents = {kNoParent, 0, 1};
    p.spec.bone_lengths = {0.0, 320.0, 260.0};
    p.spec.mirror_map = {0, 1, 2};
    p.rest.directions.resize(3, 3);
    p.rest.directions << 0, 0, 0, 0, 1, 0, 0.4, 0.9165151389911680, 0;
    p.spec.validate();
    return p;
}

std::vector<PoseSample> toy_dataset(const SkeletonPreset& preset, int n, int L, int d,
                                    std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.count = n;
    cfg.seed = seed;
    cfg.noise_std_2d = 0.02;
    cfg.features.levels = L;
    cfg.features.dim = d;
    return generate_synthetic_dataset(preset.spec, preset.rest, cfg);
}

TrainerState toy_state(const SkeletonPreset& preset, int L, int d, const TrainConfig& tc) {
    DenoiserConfig mc;
    mc.levels = L;
    mc.dim = d;
    mc.heads = 2;
    mc.p2c_blocks = 1;
    mc.j2j_blocks = 1;
    mc.init_seed = 5;
    const auto schedule = build_schedule("linear", 100, 1e-3, 0.05);
    return TrainerState(mc, schedule, tc, preset.spec);
}

}  // namespace

TEST_CASE("adam converges on a quadratic bowl") {
    Adam<float> adam;
    adam.lr = 1e-2;
    VecX<float> w(16);
    Rng rng(2);
    for (int i = 0; i < 16; ++i) w(i) = static_cast<float>(rng.gaussian());
    for (int step = 0; step < 2000; ++step) {
        const VecX<float> g = 2.0f * w;  // d/dw ||w||^2
        adam.step(w, g);
    }
    CHECK(w.norm() < 1e-3);
}

TEST_CASE("noise-MSE loss") {
    const auto preset = chain3();
    const int L = 2, d = 16;
    const auto data = toy_dataset(preset, 4, L, d, 7);
    TrainConfig tc;
    tc.seed = 1;
    auto state = toy_state(preset, L, d, tc);
    const auto& sample = data[0];

    SUBCASE("a model rigged to output exactly eps gives zero loss") {
        // zero weights + head bias b make the output b for every joint and input
        state.model.params().values().setZero();
        for (size_t i = 0; i < state.model.params().blocks().size(); ++i)
            if (state.model.params().blocks()[i].name == "head.bias")
                state.model.params().mat(static_cast<int>(i)).col(0) =
                    Eigen::Vector3f(0.3f, -0.7f, 1.1f);
        Matf eps(3, 3);
        eps.col(0).setConstant(0.3f);
        eps.col(1).setConstant(-0.7f);
        eps.col(2).setConstant(1.1f);
        CHECK(loss(state.model, state.schedule, sample, 40, eps, tc.scale_mm) == 0.0);
    }

    SUBCASE("all-zero model with all-ones noise gives loss 1") {
        state.model.params().values().setZero();
        const Matf ones = Matf::Ones(3, 3);
        CHECK(loss(state.model, state.schedule, sample, 10, ones, tc.scale_mm) ==
              doctest::Approx(1.0).epsilon(1e-6));
    }

    SUBCASE("loss is invariant to a consistent joint permutation") {
        Rng rng(5);
        const Matf eps = test::random_matrix<float>(3, 3, rng);
        const double base = loss(state.model, state.schedule, sample, 25, eps, tc.scale_mm);
        const std::vector<int> perm = {2, 0, 1};
        PoseSample permuted = sample;
        Matf eps_p(3, 3);
        for (int j = 0; j < 3; ++j) {
            permuted.pose3d.coords.row(perm[j]) = sample.pose3d.coords.row(j);
            permuted.pose2d.coords.row(perm[j]) = sample.pose2d.coords.row(j);
            eps_p.row(perm[j]) = eps.row(j);
            for (int ch = 0; ch <= L; ++ch)
                permuted.features.data.row(permuted.features.row(ch, perm[j])) =
                    sample.features.data.row(sample.features.row(ch, j));
        }
        const double p = loss(state.model, state.schedule, permuted, 25, eps_p, tc.scale_mm);
        CHECK(p == doctest::Approx(base).epsilon(1e-4));  // float32 reorder noise
    }

    SUBCASE("out-of-range timestep is rejected") {
        const Matf eps = Matf::Zero(3, 3);
        CHECK_THROWS_AS(loss(state.model, state.schedule, sample, 0, eps, tc.scale_mm),
                        ConfigError);
        CHECK_THROWS_AS(loss(state.model, state.schedule, sample, 101, eps, tc.scale_mm),
                        ConfigError);
    }
}

TEST_CASE("train_epoch") {
    const auto preset = chain3();
    const int L = 2, d = 16;
    const auto data = toy_dataset(preset, 50, L, d, 11);

    SUBCASE("zero learning rate leaves parameters unchanged") {
        TrainConfig tc;
        tc.seed = 3;
        tc.lr_start = 0.0;
        tc.batch_size = 16;
        tc.epochs = 1;
        auto state = toy_state(preset, L, d, tc);
        const Vecf before = state.model.params().values();
        train_epoch(state, data);
        CHECK(state.model.params().values() == before);
    }

    SUBCASE("fixed seed reproduces parameters bitwise") {
        TrainConfig tc;
        tc.seed = 4;
        tc.batch_size = 16;
        auto a = toy_state(preset, L, d, tc);
        auto b = toy_state(preset, L, d, tc);
        for (int e = 0; e < 2; ++e) {
            train_epoch(a, data);
            train_epoch(b, data);
        }
        CHECK(a.model.params().values() == b.model.params().values());
    }

    SUBCASE("200 epochs halve the epoch-1 loss on the 50-sample toy set") {
        TrainConfig tc;
        tc.seed = 5;
        tc.batch_size = 25;
        tc.lr_start = 2e-3;
        tc.lr_decay = 1.0;
        auto state = toy_state(preset, L, d, tc);
        const double first = train_epoch(state, data).mean_loss;
        double last = first;
        for (int e = 1; e < 200; ++e) last = train_epoch(state, data).mean_loss;
        CHECK(last < 0.5 * first);
    }

    SUBCASE("learning rate decays multiplicatively per epoch") {
        TrainConfig tc;
        tc.seed = 6;
        tc.batch_size = 50;
        tc.lr_start = 6e-4;
        tc.lr_decay = 0.993;
        auto state = toy_state(preset, L, d, tc);
        for (int e = 1; e <= 5; ++e) {
            train_epoch(state, data);
            CHECK(state.optimizer.lr ==
                  doctest::Approx(6e-4 * std::pow(0.993, e)).epsilon(1e-12));
        }
    }

    SUBCASE("divergence aborts with the last checkpoint reference") {
        TrainConfig tc;
        tc.seed = 7;
        tc.batch_size = 64;  // one batch per epoch: epoch 1 steps once, epoch 2 sees the blowup
        tc.epochs = 3;
        tc.lr_start = 1e12;
        auto state = toy_state(preset, L, d, tc);
        const auto dir = test::scratch_dir("diverge");
        const std::string ckpt = dir + "/model.ckpt";
        try {
            train(state, data, ckpt);
            FAIL("expected TrainingDiverged");
        } catch (const TrainingDiverged& e) {
            CHECK(e.epoch >= 2);
            CHECK(e.last_checkpoint == ckpt);
        }
    }
}

TEST_CASE("flip augmentation statistics on a mirror-symmetric dataset") {
    const auto preset = chain3();  // every joint self-mirrored: flip negates x
    const int L = 2, d = 16;
    auto half = toy_dataset(preset, 25, L, d, 13);
    std::vector<PoseSample> data = half;
    for (const auto& s : half) data.push_back(horizontal_flip(s, preset.spec));

    TrainConfig tc;
    tc.seed = 8;
    tc.batch_size = 10;
    auto state = toy_state(preset, L, d, tc);

    auto epoch_moments = [&](double flip_prob) {
        TrainerState st = state;
        st.config.flip_prob = flip_prob;
        Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
        double sq = 0.0;
        long n = 0;
        for (const auto& batch : draw_epoch_batches(st, data)) {
            mean += batch.y0.colwise().sum().cast<double>();
            sq += batch.y0.cast<double>().squaredNorm();
            n += batch.y0.rows();
        }
        mean /= static_cast<double>(n);
        return std::make_pair(mean, sq / static_cast<double>(n));
    };

    // the flipped multiset equals the original, so any permutation-invariant
    // statistic of the augmented stream matches
    const auto [mean0, sq0] = epoch_moments(0.0);
    const auto [mean1, sq1] = epoch_moments(1.0);
    CHECK((mean0 - mean1).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(sq0 == doctest::Approx(sq1).epsilon(1e-5));

    // and the draw stream itself does not depend on flip_prob
    TrainerState sa = state, sb = state;
    sa.config.flip_prob = 0.0;
    sb.config.flip_prob = 1.0;
    const auto ba = draw_epoch_batches(sa, data);
    const auto bb = draw_epoch_batches(sb, data);
    REQUIRE(ba.size() == bb.size());
    for (size_t i = 0; i < ba.size(); ++i) {
        CHECK(ba[i].ts == bb[i].ts);
        CHECK(ba[i].eps == bb[i].eps);
    }
}

TEST_CASE("checkpointing") {
    const auto preset = chain3();
    const int L = 2, d = 16;
    const auto data = toy_dataset(preset, 30, L, d, 17);
    const auto dir = test::scratch_dir("ckpt");

    TrainConfig tc;
    tc.seed = 9;
    tc.batch_size = 10;
    tc.epochs = 5;

    SUBCASE("save, load, save is byte-identical") {
        auto state = toy_state(preset, L, d, tc);
        for (int e = 0; e < 2; ++e) train_epoch(state, data);
        const std::string p1 = dir + "/a.ckpt", p2 = dir + "/b.ckpt";
        save_checkpoint(p1, state);
        const TrainerState loaded = load_checkpoint(p1);
        save_checkpoint(p2, loaded);
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string c1((std::istreambuf_iterator<char>(f1)), {});
        const std::string c2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(c1 == c2);
        CHECK_FALSE(c1.empty());
    }

    SUBCASE("resume matches uninterrupted training bitwise") {
        auto straight = toy_state(preset, L, d, tc);
        train(straight, data);
        CHECK(straight.epoch == 5);

        auto first = toy_state(preset, L, d, tc);
        first.config.epochs = 3;
        train(first, data);
        const std::string ckpt = dir + "/resume.ckpt";
        save_checkpoint(ckpt, first);
        TrainerState resumed = load_checkpoint(ckpt);
        resumed.config.epochs = 5;
        train(resumed, data);

        CHECK(resumed.model.params().values() == straight.model.params().values());
        CHECK(resumed.optimizer.m == straight.optimizer.m);
        CHECK(resumed.optimizer.v == straight.optimizer.v);
        CHECK(resumed.optimizer.lr == straight.optimizer.lr);
    }

    SUBCASE("corrupted magic bytes are rejected") {
        auto state = toy_state(preset, L, d, tc);
        const std::string path = dir + "/corrupt.ckpt";
        save_checkpoint(path, state);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOTACKPT", 8);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }

    SUBCASE("truncated file is rejected") {
        auto state = toy_state(preset, L, d, tc);
        const std::string path = dir + "/trunc.ckpt";
        save_checkpoint(path, state);
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        in.close();
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<long>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
}
