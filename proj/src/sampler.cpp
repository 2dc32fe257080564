#include "liftkit/sampler.hpp"

#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

std::vector<Coords3> init_hypotheses(int hypotheses, int joints, std::uint64_t seed) {
    if (hypotheses < 1) throw ConfigError("sampler: H must be >= 1");
    if (joints < 1) throw ConfigError("sampler: J must be >= 1");
    std::vector<Coords3> out;
    out.reserve(hypotheses);
    for (int h = 0; h < hypotheses; ++h) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(h)));
        Coords3 y(joints, 3);
        for (int j = 0; j < joints; ++j)
            for (int c = 0; c < 3; ++c) y(j, c) = rng.gaussian();
        out.push_back(std::move(y));
    }
    return out;
}

Matd ddim_update(const DiffusionSchedule& schedule, const Matd& y_t, int t_cur, int t_next,
                 const Matd& eps_hat, const std::string& variant) {
    if (t_cur <= t_next || t_next < 0 || t_cur > schedule.total_steps)
        throw ConfigError("sampler: need T >= t_cur > t_next >= 0");
    if (!y_t.allFinite()) throw NumericalError("ddim_step", "non-finite input pose");
    Matd y_next;
    if (variant == "ddim") {
        const double abar_cur = schedule.alpha_bar(t_cur);
        const double abar_next = schedule.alpha_bar(t_next);  // abar_0 = 1
        const Matd y0_hat = (y_t - std::sqrt(1.0 - abar_cur) * eps_hat) / std::sqrt(abar_cur);
        y_next = std::sqrt(abar_next) * y0_hat + std::sqrt(1.0 - abar_next) * eps_hat;
    } else if (variant == "literal") {
        y_next = y_t - eps_hat;
    } else {
        throw ConfigError("sampler: unknown variant '" + variant + "'");
    }
    if (!y_next.allFinite()) throw NumericalError("ddim_step", "non-finite output pose");
    return y_next;
}

Matd ddim_step(const BatchDenoiseFn& fn, const DiffusionSchedule& schedule, const Matd& y_t,
               int t_cur, int t_next, const std::string& variant) {
    return ddim_update(schedule, y_t, t_cur, t_next, fn(y_t, t_cur), variant);
}

std::vector<Coords3> sample_hypotheses(const BatchDenoiseFn& fn,
                                       const DiffusionSchedule& schedule, int joints,
                                       const SamplerConfig& config) {
    if (config.steps < 1 || config.steps > schedule.total_steps)
        throw ConfigError("sampler: need 1 <= K <= T");
    const std::vector<Coords3> init = init_hypotheses(config.hypotheses, joints, config.seed);
    const int H = config.hypotheses;

    Matd y(static_cast<Eigen::Index>(H) * joints, 3);
    for (int h = 0; h < H; ++h) y.middleRows(static_cast<Eigen::Index>(h) * joints, joints) = init[h];

    const std::vector<int> steps = spacing(schedule.total_steps, config.steps);
    for (size_t k = 0; k < steps.size(); ++k) {
        const int t_cur = steps[k];
        const int t_next = k + 1 < steps.size() ? steps[k + 1] : 0;
        y = ddim_step(fn, schedule, y, t_cur, t_next, config.variant);
    }

    std::vector<Coords3> out;
    out.reserve(H);
    for (int h = 0; h < H; ++h)
        out.push_back(y.middleRows(static_cast<Eigen::Index>(h) * joints, joints));
    return out;
}

BatchDenoiseFn model_denoiser(const Denoiser& model, const ConditioningFeatures& features,
                              ConditioningMask mask) {
    return [&model, &features, mask](const Matd& y, int t) -> Matd {
        const int J = features.joints;
        const int H = static_cast<int>(y.rows()) / J;
        const Matf yf = y.cast<float>();
        std::vector<const ConditioningFeatures*> fs(H, &features);
        const std::vector<int> ts(H, t);
        return model.forward_batch(yf, fs, ts, mask).cast<double>();
    };
}

HypothesisSet sample_frame(const Denoiser& model, const DiffusionSchedule& schedule,
                           const ConditioningFeatures& features, const std::string& frame_id,
                           const SamplerConfig& config, double scale_mm,
                           ConditioningMask mask) {
    HypothesisSet set;
    set.frame_id = frame_id;
    set.config = config;
    set.config.total_steps = schedule.total_steps;
    set.poses = sample_hypotheses(model_denoiser(model, features, mask), schedule,
                                  features.joints, config);
    for (auto& p : set.poses) {
        p *= scale_mm;
        const Eigen::RowVector3d root = p.row(0);
        p.rowwise() -= root;  // root-relative ingestion
    }
    return set;
}

}  // namespace liftkit
