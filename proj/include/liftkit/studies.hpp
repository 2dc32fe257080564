#pragma once

#include <string>
#include <vector>

#include "liftkit/config.hpp"
#include "liftkit/pipeline.hpp"

namespace liftkit {

struct StudyRowsHCount {
    int hypotheses = 0;
    std::string strategy;
    double mpjpe_mm = 0.0;
};

// MPJPE vs number of hypotheses, per strategy. One sampling pass draws
// max(h_values) hypotheses per frame; smaller H are exact prefixes, so the
// oracle columns are non-increasing by construction.
std::vector<StudyRowsHCount> study_hypothesis_count(const TrainerState& state,
                                                    const std::vector<PoseSample>& test_set,
                                                    const std::vector<int>& h_values,
                                                    const SamplerConfig& sampler,
                                                    std::uint64_t seed);

struct StudyRowConfidence {
    double recall = 0.0;
    long kept_frames = 0;
    long total_frames = 0;
    double kept_mpjpe_mm = 0.0;
    double full_mpjpe_mm = 0.0;
};

// Kept-set MPJPE at each recall, rows sorted by recall descending.
std::vector<StudyRowConfidence> study_confidence(const std::vector<HypothesisSet>& sets,
                                                 const std::vector<PoseSample>& test_set,
                                                 std::vector<double> recalls,
                                                 const std::string& strategy,
                                                 std::uint64_t seed);

struct StudyRowAblation {
    std::string condition;  // "pose", "context", "pose+context"
    double a = 0.0, m = 0.0, b = 0.0, b_joint = 0.0;  // MPJPE per column
};

// Retrains per conditioning mask (reusing base_state for the unmasked row) and
// evaluates the four aggregation columns on the shared test set.
std::vector<StudyRowAblation> study_conditioning_ablation(
    const ExperimentConfig& cfg, const std::vector<PoseSample>& train_set,
    const std::vector<PoseSample>& test_set, const TrainerState* base_state,
    const std::string& ckpt_dir);

std::string hcount_to_csv(const std::vector<StudyRowsHCount>& rows);
std::string hcount_to_json(const std::vector<StudyRowsHCount>& rows);
std::string confidence_to_csv(const std::vector<StudyRowConfidence>& rows);
std::string confidence_to_json(const std::vector<StudyRowConfidence>& rows);
std::string ablation_to_csv(const std::vector<StudyRowAblation>& rows);
std::string ablation_to_json(const std::vector<StudyRowAblation>& rows);

}  // namespace liftkit
