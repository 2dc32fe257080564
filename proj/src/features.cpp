#include "liftkit/features.hpp"

#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

ConditioningFeatures ConditioningFeatures::zeros(int L, int J, int d) {
    ConditioningFeatures f;
    f.levels = L;
    f.joints = J;
    f.dim = d;
    f.data = Matf::Zero((L + 1) * J, d);
    return f;
}

void ConditioningFeatures::check_shape() const {
    if (levels < 1 || joints < 1 || dim < 1)
        throw ConfigError("features: L, J, d must be positive");
    if (data.rows() != (levels + 1) * joints || data.cols() != dim)
        throw ConfigError("features: tensor shape does not match (L+1) x J x d");
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg) : cfg_(cfg) {
    if (cfg.levels < 1 || cfg.dim < 1)
        throw ConfigError("feature extractor: levels and dim must be positive");
    Rng rng(derive_seed(cfg.lift_seed, 0x11f7));
    lift_.resize(cfg.dim, 2);
    for (int k = 0; k < cfg.dim; ++k)
        for (int c = 0; c < 2; ++c)
            lift_(k, c) = static_cast<float>(rng.gaussian() * M_SQRT1_2);
}

void FeatureExtractor::fill_pose_channel(ConditioningFeatures& f, const Pose2D& pose2d) const {
    const int J = pose2d.joints();
    for (int j = 0; j < J; ++j) {
        const Eigen::Vector2f p = pose2d.coords.row(j).cast<float>();
        f.data.row(f.row(cfg_.levels, j)) = (lift_ * p).transpose();
    }
}

namespace {

double quantize(double x, double step) {
    return step > 0 ? step * std::floor(x / step) + 0.5 * step : x;
}

}  // namespace

void FeatureExtractor::fill_context_channels(ConditioningFeatures& f, const Pose2D& pose2d,
                                             const Vecd& depth_mm,
                                             std::uint64_t context_seed) const {
    const int J = pose2d.joints();
    const int d = cfg_.dim;
    for (int l = 0; l < cfg_.levels; ++l) {
        Rng rng(derive_seed(context_seed, 0xc0de, static_cast<std::uint64_t>(l)));
        const double sigma = 0.75 * std::pow(2.0, l);  // multi-resolution frequencies
        Matd proj(d, 3);
        Vecd phase(d);
        for (int k = 0; k < d; ++k) {
            for (int c = 0; c < 3; ++c) proj(k, c) = rng.gaussian() * sigma;
            phase(k) = rng.uniform(0.0, 2.0 * M_PI);
        }
        for (int j = 0; j < J; ++j) {
            Eigen::Vector3d u(quantize(pose2d.coords(j, 0), cfg_.quant_step),
                              quantize(pose2d.coords(j, 1), cfg_.quant_step),
                              depth_mm.size() > 0 ? std::tanh(depth_mm(j) / cfg_.depth_scale_mm)
                                                  : 0.0);
            const Vecd arg = proj * u + phase;
            for (int k = 0; k < d; ++k)
                f.data(f.row(l, j), k) = static_cast<float>(std::sin(arg(k)));
        }
    }
}

ConditioningFeatures FeatureExtractor::extract(const Pose2D& pose2d,
                                               std::uint64_t context_seed) const {
    pose2d.check_finite();
    ConditioningFeatures f = ConditioningFeatures::zeros(cfg_.levels, pose2d.joints(), cfg_.dim);
    fill_pose_channel(f, pose2d);
    fill_context_channels(f, pose2d, Vecd(), context_seed);
    return f;
}

ConditioningFeatures FeatureExtractor::extract_with_context(const Pose2D& detected2d,
                                                            const Pose2D& clean2d,
                                                            const Vecd& depth_mm,
                                                            std::uint64_t context_seed) const {
    detected2d.check_finite();
    clean2d.check_finite();
    if (detected2d.joints() != clean2d.joints() ||
        depth_mm.size() != detected2d.joints())
        throw ConfigError("feature extractor: joint counts disagree");
    ConditioningFeatures f =
        ConditioningFeatures::zeros(cfg_.levels, detected2d.joints(), cfg_.dim);
    fill_pose_channel(f, detected2d);
    fill_context_channels(f, clean2d, depth_mm, context_seed);
    return f;
}

}  // namespace liftkit
