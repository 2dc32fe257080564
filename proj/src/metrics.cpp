#include "liftkit/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "liftkit/errors.hpp"
#include "liftkit/pose_io.hpp"

namespace liftkit {

namespace {

void require_same_joints(const Pose3D& pred, const Pose3D& gt) {
    if (pred.joints() != gt.joints() || pred.joints() < 1)
        throw ConfigError("metrics: joint counts disagree");
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
    require_same_joints(pred, gt);
    return (pred.coords - gt.coords).rowwise().norm().mean();
}

Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt) {
    require_same_joints(pred, gt);
    const int J = pred.joints();
    const Eigen::RowVector3d mu_p = pred.coords.colwise().mean();
    const Eigen::RowVector3d mu_g = gt.coords.colwise().mean();
    const Coords3 P = pred.coords.rowwise() - mu_p;
    const Coords3 G = gt.coords.rowwise() - mu_g;

    const double var_p = P.squaredNorm() / J;
    if (!(var_p > 0.0))
        throw NumericalError("procrustes", "degenerate prediction: all joints coincide");

    // cross-covariance factorization with determinant sign correction
    const Eigen::Matrix3d cov = (G.transpose() * P) / J;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;
    const Eigen::Matrix3d R =
        svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    const double scale = svd.singularValues().dot(d) / var_p;

    Pose3D aligned;
    aligned.coords = (scale * (R * P.transpose())).transpose();
    aligned.coords.rowwise() += mu_g;
    return aligned;
}

double p_mpjpe(const Pose3D& pred, const Pose3D& gt) {
    return mpjpe(procrustes_align(pred, gt), gt);
}

double pck(const Pose3D& pred, const Pose3D& gt, double threshold_mm) {
    require_same_joints(pred, gt);
    if (threshold_mm < 0.0) throw ConfigError("pck: threshold must be >= 0");
    const auto errors = (pred.coords - gt.coords).rowwise().norm();
    int within = 0;
    for (int j = 0; j < pred.joints(); ++j)
        if (errors(j) <= threshold_mm) ++within;
    return 100.0 * within / pred.joints();
}

double auc(const Pose3D& pred, const Pose3D& gt) {
    double acc = 0.0;
    int points = 0;
    for (int thr = 0; thr <= 150; thr += 5) {
        acc += pck(pred, gt, thr) / 100.0;
        ++points;
    }
    return acc / points;
}

MetricReport evaluate(const std::vector<EvalFrame>& frames, bool group_by_action) {
    if (frames.empty()) throw ConfigError("evaluate: no frames");
    MetricReport report;
    report.frame_count = static_cast<long>(frames.size());

    struct Acc {
        MetricValues sum;
        long n = 0;
        void add(const MetricValues& v) {
            sum.mpjpe_mm += v.mpjpe_mm;
            sum.p_mpjpe_mm += v.p_mpjpe_mm;
            sum.pck150 += v.pck150;
            sum.auc += v.auc;
            ++n;
        }
        MetricValues mean() const {
            return {sum.mpjpe_mm / n, sum.p_mpjpe_mm / n, sum.pck150 / n, sum.auc / n};
        }
    };
    Acc overall;
    std::map<std::string, Acc> by_action;
    for (const auto& f : frames) {
        MetricValues v;
        v.mpjpe_mm = mpjpe(f.pred, f.gt);
        v.p_mpjpe_mm = p_mpjpe(f.pred, f.gt);
        v.pck150 = pck(f.pred, f.gt, 150.0);
        v.auc = auc(f.pred, f.gt);
        overall.add(v);
        if (group_by_action) by_action[f.action_tag.empty() ? "untagged" : f.action_tag].add(v);
    }
    report.overall = overall.mean();
    for (const auto& [tag, acc] : by_action) report.per_action[tag] = acc.mean();
    return report;
}

MetricReport evaluate_files(const std::string& pred_path, const std::string& gt_path,
                            bool group_by_action) {
    const auto preds = read_predictions(pred_path);
    const auto gts = read_poses(gt_path);
    if (preds.size() != gts.size())
        throw ConfigError("evaluate: prediction/ground-truth frame counts differ (" +
                          std::to_string(preds.size()) + " vs " + std::to_string(gts.size()) +
                          ")");
    std::unordered_map<std::string, const PoseSample*> by_id;
    for (const auto& s : gts) by_id[s.sample_id] = &s;
    std::vector<EvalFrame> frames;
    frames.reserve(preds.size());
    for (const auto& p : preds) {
        const auto it = by_id.find(p.frame_id);
        if (it == by_id.end())
            throw ConfigError("evaluate: no ground truth for frame id '" + p.frame_id + "'");
        EvalFrame f;
        f.id = p.frame_id;
        f.pred = p.pose3d;
        f.gt = it->second->pose3d;
        f.action_tag = it->second->action_tag;
        frames.push_back(std::move(f));
    }
    return evaluate(frames, group_by_action);
}

namespace {

nlohmann::json values_to_json(const MetricValues& v) {
    return {{"mpjpe_mm", v.mpjpe_mm},
            {"p_mpjpe_mm", v.p_mpjpe_mm},
            {"pck150", v.pck150},
            {"auc", v.auc}};
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["frame_count"] = report.frame_count;
    j["overall"] = values_to_json(report.overall);
    nlohmann::json per_action = nlohmann::json::object();
    for (const auto& [tag, v] : report.per_action) per_action[tag] = values_to_json(v);
    j["per_action"] = per_action;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricReport& report) {
    std::string csv = "group,frames,mpjpe_mm,p_mpjpe_mm,pck150,auc\n";
    char line[256];
    auto emit = [&](const std::string& tag, long frames, const MetricValues& v) {
        std::snprintf(line, sizeof(line), "%s,%ld,%.6f,%.6f,%.6f,%.6f\n", tag.c_str(), frames,
                      v.mpjpe_mm, v.p_mpjpe_mm, v.pck150, v.auc);
        csv += line;
    };
    emit("overall", report.frame_count, report.overall);
    for (const auto& [tag, v] : report.per_action) emit(tag, -1, v);
    return csv;
}

}  // namespace liftkit
