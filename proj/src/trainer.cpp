#include "liftkit/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "liftkit/checkpoint.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(lr_start >= 0.0)) throw ConfigError("train: lr_start must be >= 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw ConfigError("train: lr_decay must lie in (0, 1]");
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw ConfigError("train: flip_prob must lie in [0, 1]");
    if (!(scale_mm > 0.0)) throw ConfigError("train: scale_mm must be positive");
}

TrainerState::TrainerState(const DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                           const TrainConfig& train_cfg, const SkeletonSpec& skel)
    : model(model_cfg), schedule(sched), config(train_cfg), skeleton(skel) {
    config.validate();
    schedule.validate();
    skeleton.validate();
    optimizer.lr = config.lr_start;
    optimizer.reset(model.params().size());
}

double loss(const Denoiser& model, const DiffusionSchedule& schedule,
            const PoseSample& sample, int t, const Matf& eps, double scale_mm,
            ConditioningMask mask) {
    const int J = sample.pose3d.joints();
    if (eps.rows() != J || eps.cols() != 3) throw ConfigError("loss: eps must be J x 3");
    const Matf y0 = (sample.pose3d.coords / scale_mm).cast<float>();
    const double abar = schedule.alpha_bar(t);
    if (t < 1 || t > schedule.total_steps) throw ConfigError("loss: t out of range");
    const Matf y_t = static_cast<float>(std::sqrt(abar)) * y0 +
                     static_cast<float>(std::sqrt(1.0 - abar)) * eps;
    const Matf eps_hat = model.forward(y_t, sample.features, t, mask);
    const double l = (eps - eps_hat).array().square().mean();
    if (!std::isfinite(l)) throw NumericalError("loss", "non-finite loss");
    return l;
}

namespace {

// flipped samples are stored by value; reserve() keeps the feature pointers
// stable while the batch grows
TrainBatch draw_batch(const std::vector<PoseSample>& dataset, const std::vector<size_t>& order,
                      size_t begin, size_t end, const TrainerState& state, Rng& rng) {
    const int J = state.skeleton.joint_count;
    const int T = state.schedule.total_steps;
    const auto B = static_cast<Eigen::Index>(end - begin);
    TrainBatch out;
    out.ts.reserve(B);
    out.y0.resize(B * J, 3);
    out.y_t.resize(B * J, 3);
    out.eps.resize(B * J, 3);
    out.features.reserve(B);
    out.flipped_storage.reserve(B);
    for (size_t i = begin; i < end; ++i) {
        const Eigen::Index bi = static_cast<Eigen::Index>(i - begin);
        const int t = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(T)));
        // the uniform is always consumed so the stream does not depend on flip_prob
        const bool flip = rng.uniform() < state.config.flip_prob;
        const PoseSample* s = &dataset[order[i]];
        if (flip) {
            out.flipped_storage.push_back(horizontal_flip(*s, state.skeleton));
            s = &out.flipped_storage.back();
        }
        const Matf y0 = (s->pose3d.coords / state.config.scale_mm).cast<float>();
        Matf eps(J, 3);
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c) eps(j, c) = static_cast<float>(rng.gaussian());
        const double abar = state.schedule.alpha_bar(t);
        out.y0.middleRows(bi * J, J) = y0;
        out.y_t.middleRows(bi * J, J) = static_cast<float>(std::sqrt(abar)) * y0 +
                                        static_cast<float>(std::sqrt(1.0 - abar)) * eps;
        out.eps.middleRows(bi * J, J) = eps;
        out.ts.push_back(t);
        out.features.push_back(&s->features);
    }
    return out;
}

std::vector<size_t> epoch_order(const TrainerState& state, size_t n, Rng& rng) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    // Fisher-Yates from the epoch stream
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    (void)state;
    return order;
}

}  // namespace

std::vector<TrainBatch> draw_epoch_batches(const TrainerState& state,
                                           const std::vector<PoseSample>& dataset) {
    if (dataset.empty()) throw ConfigError("train: dataset is empty");
    Rng rng(derive_seed(state.config.seed, 0xe90c, static_cast<std::uint64_t>(state.epoch)));
    const std::vector<size_t> order = epoch_order(state, dataset.size(), rng);
    std::vector<TrainBatch> batches;
    for (size_t begin = 0; begin < order.size(); begin += state.config.batch_size) {
        const size_t end = std::min(order.size(), begin + state.config.batch_size);
        batches.push_back(draw_batch(dataset, order, begin, end, state, rng));
    }
    return batches;
}

EpochStats train_epoch(TrainerState& state, const std::vector<PoseSample>& dataset) {
    if (dataset.empty()) throw ConfigError("train: dataset is empty");
    const int J = state.skeleton.joint_count;
    Rng rng(derive_seed(state.config.seed, 0xe90c, static_cast<std::uint64_t>(state.epoch)));
    const std::vector<size_t> order = epoch_order(state, dataset.size(), rng);

    EpochStats stats;
    double loss_sum = 0.0;
    size_t sample_count = 0;
    ForwardTrace<float> trace;
    for (size_t begin = 0; begin < order.size(); begin += state.config.batch_size) {
        const size_t end = std::min(order.size(), begin + state.config.batch_size);
        TrainBatch batch = draw_batch(dataset, order, begin, end, state, rng);
        const auto B = static_cast<Eigen::Index>(end - begin);

        state.model.params().zero_grads();
        Matf eps_hat;
        try {
            eps_hat = state.model.forward_batch(batch.y_t, batch.features, batch.ts,
                                                state.config.mask, &trace);
        } catch (const NumericalError&) {
            // exploded activations are a divergence, not a caller error
            throw TrainingDiverged(state.epoch + 1, {});
        }
        const Matf diff = eps_hat - batch.eps;
        const double batch_loss = diff.array().square().sum() / (3.0 * J * B);
        if (!std::isfinite(batch_loss)) {
            throw TrainingDiverged(state.epoch + 1, {});
        }
        // d(loss)/d(eps_hat) for loss = mean over batch of per-sample MSE
        const Matf d_eps = diff * static_cast<float>(2.0 / (3.0 * J * B));
        state.model.backward(trace, d_eps);

        if (state.config.grad_clip > 0.0) {
            const double norm = state.model.params().grads().norm();
            if (norm > state.config.grad_clip)
                state.model.params().grads() *=
                    static_cast<float>(state.config.grad_clip / norm);
        }
        state.optimizer.step(state.model.params().values(), state.model.params().grads());
        loss_sum += batch_loss * static_cast<double>(B);
        sample_count += end - begin;
        ++stats.batches;
    }
    state.epoch += 1;
    state.optimizer.lr *= state.config.lr_decay;
    stats.mean_loss = loss_sum / static_cast<double>(sample_count);
    stats.lr = state.optimizer.lr;
    return stats;
}

void train(TrainerState& state, const std::vector<PoseSample>& dataset,
           const std::string& checkpoint_path, const EpochCallback& on_epoch) {
    std::string last_good;
    while (state.epoch < state.config.epochs) {
        EpochStats stats;
        try {
            stats = train_epoch(state, dataset);
        } catch (const TrainingDiverged& e) {
            throw TrainingDiverged(e.epoch, last_good);
        }
        if (!checkpoint_path.empty()) {
            save_checkpoint(checkpoint_path, state);
            last_good = checkpoint_path;
        }
        if (on_epoch) on_epoch(state, stats);
    }
}

}  // namespace liftkit
