#include "liftkit/dataset.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

void CameraModel::validate() const {
    if (!(focal > 0.0)) throw ConfigError("camera: focal length must be positive");
    if (!(distance_mm > 0.0)) throw ConfigError("camera: distance must be positive");
}

Pose2D CameraModel::project(const Pose3D& pose) const {
    const int J = pose.joints();
    Pose2D out;
    out.coords.resize(J, 2);
    for (int j = 0; j < J; ++j) {
        const double z = pose.coords(j, 2) + distance_mm;
        if (!(z > 0.0)) throw NumericalError("projection", "joint behind the camera");
        out.coords(j, 0) = focal * pose.coords(j, 0) / z;
        out.coords(j, 1) = focal * pose.coords(j, 1) / z;
    }
    return out;
}

namespace {

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle_rad) {
    // uniform axis, uniform angle in [0, max]
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d axis(r * std::cos(phi), r * std::sin(phi), z);
    const double angle = rng.uniform(0.0, max_angle_rad);
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Pose3D fk_pose(const SkeletonSpec& spec, const SkeletonRest& rest, Rng& rng,
               double max_angle_rad) {
    const int J = spec.joint_count;
    std::vector<Eigen::Matrix3d> global(J);
    Coords3 coords = Coords3::Zero(J, 3);
    // free yaw at the root, limited rotations below
    global[0] = Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), Eigen::Vector3d::UnitY())
                    .toRotationMatrix();
    for (int j = 1; j < J; ++j) {
        const int p = spec.parents[j];
        global[j] = global[p] * random_rotation(rng, max_angle_rad);
        const Eigen::Vector3d dir = global[j] * rest.directions.row(j).transpose();
        coords.row(j) = coords.row(p) + spec.bone_lengths[j] * dir.transpose();
    }
    Pose3D pose;
    pose.coords = coords;
    return pose;
}

}  // namespace

std::vector<PoseSample> generate_synthetic_dataset(const SkeletonSpec& spec,
                                                   const SkeletonRest& rest,
                                                   const GeneratorConfig& cfg) {
    spec.validate();
    cfg.camera.validate();
    if (cfg.count < 0) throw ConfigError("generator: count must be non-negative");
    if (rest.directions.rows() != spec.joint_count)
        throw ConfigError("generator: rest directions do not match the skeleton");

    FeatureExtractor extractor(cfg.features);
    std::vector<PoseSample> out;
    out.reserve(cfg.count);
    Rng rng(derive_seed(cfg.seed, 0xda7a));

    char id[64];
    for (int i = 0; i < cfg.count; ++i) {
        PoseSample s;
        std::snprintf(id, sizeof(id), "%s-%06d", cfg.id_prefix.c_str(), i);
        s.sample_id = id;
        const int action = cfg.action_count > 1 ? i % cfg.action_count : 0;
        if (cfg.action_count > 1) s.action_tag = "a" + std::to_string(action);

        // actions differ by how far joints may swing
        const double scale = cfg.action_count > 1 ? 0.7 + 0.5 * action / (cfg.action_count - 1)
                                                  : 1.0;
        s.pose3d = fk_pose(spec, rest, rng, scale * cfg.max_angle_deg * M_PI / 180.0);

        const Pose2D clean = cfg.camera.project(s.pose3d);
        s.pose2d = clean;
        if (cfg.noise_std_2d > 0.0)
            for (int j = 0; j < spec.joint_count; ++j)
                for (int c = 0; c < 2; ++c)
                    s.pose2d.coords(j, c) += cfg.noise_std_2d * rng.gaussian();

        if (cfg.context_depth_cue) {
            const Vecd depth = s.pose3d.coords.col(2);
            s.features = extractor.extract_with_context(s.pose2d, clean, depth, cfg.context_seed);
        } else {
            s.features = extractor.extract(s.pose2d, cfg.context_seed);
        }
        out.push_back(std::move(s));
    }
    return out;
}

PoseSample horizontal_flip(const PoseSample& sample, const SkeletonSpec& spec) {
    const int J = spec.joint_count;
    if (sample.pose3d.joints() != J || sample.features.joints != J)
        throw ConfigError("flip: sample does not match the skeleton");
    PoseSample out = sample;
    for (int j = 0; j < J; ++j) {
        const int m = spec.mirror_map[j];
        out.pose3d.coords(m, 0) = -sample.pose3d.coords(j, 0);
        out.pose3d.coords(m, 1) = sample.pose3d.coords(j, 1);
        out.pose3d.coords(m, 2) = sample.pose3d.coords(j, 2);
        out.pose2d.coords(m, 0) = -sample.pose2d.coords(j, 0);
        out.pose2d.coords(m, 1) = sample.pose2d.coords(j, 1);
        for (int ch = 0; ch < sample.features.channels(); ++ch)
            out.features.data.row(out.features.row(ch, m)) =
                sample.features.data.row(sample.features.row(ch, j));
    }
    return out;
}

Pose3D mean_pose(const std::vector<PoseSample>& samples) {
    if (samples.empty()) throw ConfigError("mean_pose: empty dataset");
    Coords3 acc = Coords3::Zero(samples.front().pose3d.joints(), 3);
    for (const auto& s : samples) acc += s.pose3d.coords;
    Pose3D p;
    p.coords = acc / static_cast<double>(samples.size());
    return p;
}

}  // namespace liftkit
