#pragma once

#include <string>
#include <vector>

#include "liftkit/dataset.hpp"
#include "liftkit/sampler_types.hpp"

namespace liftkit {

// All pose containers share one layout: a JSON header line
// {version, kind, J, L, d, count, ...} followed by one JSON record per line.
// Pose arrays are row-major numbers; feature blocks are base64 float32 LE.

void write_poses(const std::string& path, const std::vector<PoseSample>& samples);
std::vector<PoseSample> read_poses(const std::string& path);

void write_hypotheses(const std::string& path, const std::vector<HypothesisSet>& sets);
std::vector<HypothesisSet> read_hypotheses(const std::string& path);

// Single aggregated/predicted pose per record (kind = "poses").
struct PredictedPose {
    std::string frame_id;
    Pose3D pose3d;
};
void write_predictions(const std::string& path, const std::vector<PredictedPose>& preds);
std::vector<PredictedPose> read_predictions(const std::string& path);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace liftkit
