#pragma once

#include <functional>
#include <string>
#include <vector>

#include "liftkit/adam.hpp"
#include "liftkit/dataset.hpp"
#include "liftkit/denoiser.hpp"
#include "liftkit/schedule.hpp"
#include "liftkit/skeleton.hpp"

namespace liftkit {

struct TrainConfig {
    int batch_size = 128;
    int epochs = 50;
    double lr_start = 6e-4;
    double lr_decay = 0.993;  // multiplicative per-epoch factor
    double flip_prob = 0.5;
    std::uint64_t seed = 0;
    double scale_mm = 1000.0;  // poses divided by this before diffusion
    double grad_clip = 0.0;    // global-norm clip, 0 = off
    ConditioningMask mask = ConditioningMask::kNone;

    void validate() const;
};

// Live training state: model + optimizer + schedule + bookkeeping. The
// checkpoint serializes exactly this (plus skeleton/config) so a resumed run
// continues the same deterministic stream.
struct TrainerState {
    Denoiser model;
    DiffusionSchedule schedule;
    TrainConfig config;
    SkeletonSpec skeleton;
    Adam<float> optimizer;
    int epoch = 0;  // epochs completed

    TrainerState(const DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                 const TrainConfig& train_cfg, const SkeletonSpec& skel);
};

// Noise-MSE for one sample: mean over J x 3 of (eps - eps_hat)^2, where
// y_t = forward_sample(schedule, y0 / scale, t, eps).
double loss(const Denoiser& model, const DiffusionSchedule& schedule,
            const PoseSample& sample, int t, const Matf& eps, double scale_mm,
            ConditioningMask mask = ConditioningMask::kNone);

struct EpochStats {
    double mean_loss = 0.0;
    double lr = 0.0;
    int batches = 0;
};

// One augmented, noised batch. flipped_storage owns the flipped samples that
// the feature pointers reference.
struct TrainBatch {
    std::vector<int> ts;
    Matf y0;   // (B*J) x 3 scaled clean poses (after augmentation)
    Matf y_t;  // (B*J) x 3 noisy poses
    Matf eps;  // (B*J) x 3 injected noise
    std::vector<const ConditioningFeatures*> features;
    std::vector<PoseSample> flipped_storage;
};

// The deterministic draw stream for state.epoch: shuffle, then per sample
// t ~ U[1, T], flip decision (the uniform is consumed whatever flip_prob is),
// and unit gaussian noise. Does not mutate state.
std::vector<TrainBatch> draw_epoch_batches(const TrainerState& state,
                                           const std::vector<PoseSample>& dataset);

// One pass over the shuffled dataset: per sample draw t ~ U[1, T] and unit
// gaussian eps, flip with flip_prob, Adam step per batch, LR decay at the end.
// Deterministic given (state.config.seed, state.epoch).
EpochStats train_epoch(TrainerState& state, const std::vector<PoseSample>& dataset);

using EpochCallback = std::function<void(const TrainerState&, const EpochStats&)>;

// Runs epochs until config.epochs. checkpoint_path, when non-empty, is
// rewritten after every epoch; divergence aborts with a reference to it.
void train(TrainerState& state, const std::vector<PoseSample>& dataset,
           const std::string& checkpoint_path = {},
           const EpochCallback& on_epoch = nullptr);

}  // namespace liftkit
