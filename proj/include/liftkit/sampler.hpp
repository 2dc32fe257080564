#pragma once

#include <functional>

#include "liftkit/denoiser.hpp"
#include "liftkit/sampler_types.hpp"
#include "liftkit/schedule.hpp"

namespace liftkit {

// Batched noise predictor: takes all H hypotheses stacked as (H*J) x 3 in
// diffusion units plus the current timestep, returns eps_hat of the same
// shape. Lets tests swap the network for an analytic oracle.
using BatchDenoiseFn = std::function<Matd(const Matd& y, int t)>;

// H independent unit-gaussian J x 3 poses. Hypothesis h draws from the derived
// stream derive_seed(seed, h), so smaller-H sets are prefixes of larger ones.
std::vector<Coords3> init_hypotheses(int hypotheses, int joints, std::uint64_t seed);

// One reverse step for all stacked hypotheses.
//   ddim:    y0_hat = (y_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t)
//            y_next = sqrt(abar_next) y0_hat + sqrt(1-abar_next) eps_hat
//   literal: y_next = y_t - eps_hat
Matd ddim_update(const DiffusionSchedule& schedule, const Matd& y_t, int t_cur, int t_next,
                 const Matd& eps_hat, const std::string& variant);
Matd ddim_step(const BatchDenoiseFn& fn, const DiffusionSchedule& schedule, const Matd& y_t,
               int t_cur, int t_next, const std::string& variant);

// Full reverse chain over spacing(T, K); returns poses in diffusion units.
std::vector<Coords3> sample_hypotheses(const BatchDenoiseFn& fn,
                                       const DiffusionSchedule& schedule, int joints,
                                       const SamplerConfig& config);

// Adapter for the trained model: casts to float, replicates the conditioning
// tensor across hypotheses, applies the checkpoint's conditioning mask.
BatchDenoiseFn model_denoiser(const Denoiser& model, const ConditioningFeatures& features,
                              ConditioningMask mask = ConditioningMask::kNone);

// End-to-end for one frame: runs the chain in diffusion units, scales back to
// millimeters and re-centers each hypothesis on its root.
HypothesisSet sample_frame(const Denoiser& model, const DiffusionSchedule& schedule,
                           const ConditioningFeatures& features, const std::string& frame_id,
                           const SamplerConfig& config, double scale_mm,
                           ConditioningMask mask = ConditioningMask::kNone);

}  // namespace liftkit
