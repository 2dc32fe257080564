#include "liftkit/studies.hpp"

#include <algorithm>
#include <filesystem>

#include <json.hpp>

#include "liftkit/aggregate.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

using nlohmann::json;

namespace {

HypothesisSet prefix(const HypothesisSet& hs, int h) {
    HypothesisSet out;
    out.frame_id = hs.frame_id;
    out.config = hs.config;
    out.config.hypotheses = h;
    out.poses.assign(hs.poses.begin(), hs.poses.begin() + h);
    return out;
}

double mean_mpjpe(const std::vector<HypothesisSet>& sets,
                  const std::vector<PoseSample>& test_set, Strategy strategy,
                  std::uint64_t seed) {
    double acc = 0.0;
    for (size_t i = 0; i < sets.size(); ++i) {
        const auto result = aggregate(sets[i], strategy, derive_seed(seed, i),
                                      &test_set[i].pose3d);
        acc += mpjpe(result.pose, test_set[i].pose3d);
    }
    return acc / static_cast<double>(sets.size());
}

}  // namespace

std::vector<StudyRowsHCount> study_hypothesis_count(const TrainerState& state,
                                                    const std::vector<PoseSample>& test_set,
                                                    const std::vector<int>& h_values,
                                                    const SamplerConfig& sampler,
                                                    std::uint64_t seed) {
    if (h_values.empty()) throw ConfigError("study: h_values is empty");
    SamplerConfig max_cfg = sampler;
    max_cfg.hypotheses = *std::max_element(h_values.begin(), h_values.end());
    const auto full_sets = stage_sample(state, test_set, max_cfg);

    const Strategy strategies[] = {Strategy::kAverage, Strategy::kMedian, Strategy::kRandom,
                                   Strategy::kBest, Strategy::kBestJoint};
    std::vector<StudyRowsHCount> rows;
    for (const int h : h_values) {
        std::vector<HypothesisSet> sets;
        sets.reserve(full_sets.size());
        for (const auto& hs : full_sets) sets.push_back(prefix(hs, h));
        for (const Strategy s : strategies)
            rows.push_back({h, strategy_to_string(s),
                            mean_mpjpe(sets, test_set, s, derive_seed(seed, h))});
    }
    return rows;
}

std::vector<StudyRowConfidence> study_confidence(const std::vector<HypothesisSet>& sets,
                                                 const std::vector<PoseSample>& test_set,
                                                 std::vector<double> recalls,
                                                 const std::string& strategy,
                                                 std::uint64_t seed) {
    if (sets.size() != test_set.size())
        throw ConfigError("study: hypothesis and test frame counts differ");
    std::vector<std::pair<const HypothesisSet*, const Pose3D*>> frames;
    frames.reserve(sets.size());
    for (size_t i = 0; i < sets.size(); ++i)
        frames.emplace_back(&sets[i], &test_set[i].pose3d);

    std::sort(recalls.begin(), recalls.end(), std::greater<>());
    std::vector<StudyRowConfidence> rows;
    for (const double recall : recalls) {
        const auto r = confidence_filter(frames, recall, strategy_from_string(strategy), seed);
        rows.push_back({recall, static_cast<long>(r.kept.size()),
                        static_cast<long>(frames.size()), r.kept_mpjpe, r.full_mpjpe});
    }
    return rows;
}

std::vector<StudyRowAblation> study_conditioning_ablation(
    const ExperimentConfig& cfg, const std::vector<PoseSample>& train_set,
    const std::vector<PoseSample>& test_set, const TrainerState* base_state,
    const std::string& ckpt_dir) {
    struct Condition {
        const char* name;
        ConditioningMask mask;
    };
    const Condition conditions[] = {{"pose", ConditioningMask::kPoseOnly},
                                    {"context", ConditioningMask::kContextOnly},
                                    {"pose+context", ConditioningMask::kNone}};

    std::vector<StudyRowAblation> rows;
    for (const auto& cond : conditions) {
        const TrainerState* state = nullptr;
        TrainerState trained = [&] {
            if (cond.mask == ConditioningMask::kNone && base_state) return *base_state;
            const std::string path =
                ckpt_dir.empty()
                    ? std::string()
                    : ckpt_dir + "/ablation_" + mask_to_string(cond.mask) + ".ckpt";
            return stage_train(cfg, train_set, path, cond.mask);
        }();
        state = &trained;

        SamplerConfig sc;
        sc.hypotheses = cfg.hypotheses;
        sc.steps = cfg.steps;
        sc.variant = cfg.variant;
        sc.seed = derive_seed(cfg.seed, 0x5a3f);
        const auto sets = stage_sample(*state, test_set, sc);

        StudyRowAblation row;
        row.condition = cond.name;
        const std::uint64_t agg_seed = derive_seed(cfg.seed, 0xab1a);
        row.a = mean_mpjpe(sets, test_set, Strategy::kAverage, agg_seed);
        row.m = mean_mpjpe(sets, test_set, Strategy::kMedian, agg_seed);
        row.b = mean_mpjpe(sets, test_set, Strategy::kBest, agg_seed);
        row.b_joint = mean_mpjpe(sets, test_set, Strategy::kBestJoint, agg_seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string hcount_to_csv(const std::vector<StudyRowsHCount>& rows) {
    std::string csv = "H,strategy,mpjpe_mm\n";
    char line[96];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%s,%.6f\n", r.hypotheses, r.strategy.c_str(),
                      r.mpjpe_mm);
        csv += line;
    }
    return csv;
}

std::string hcount_to_json(const std::vector<StudyRowsHCount>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"H", r.hypotheses}, {"strategy", r.strategy}, {"mpjpe_mm", r.mpjpe_mm}});
    return arr.dump(2) + "\n";
}

std::string confidence_to_csv(const std::vector<StudyRowConfidence>& rows) {
    std::string csv = "recall,kept_frames,total_frames,kept_mpjpe_mm,full_mpjpe_mm\n";
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%.4f,%ld,%ld,%.6f,%.6f\n", r.recall, r.kept_frames,
                      r.total_frames, r.kept_mpjpe_mm, r.full_mpjpe_mm);
        csv += line;
    }
    return csv;
}

std::string confidence_to_json(const std::vector<StudyRowConfidence>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"recall", r.recall},
                       {"kept_frames", r.kept_frames},
                       {"total_frames", r.total_frames},
                       {"kept_mpjpe_mm", r.kept_mpjpe_mm},
                       {"full_mpjpe_mm", r.full_mpjpe_mm}});
    return arr.dump(2) + "\n";
}

std::string ablation_to_csv(const std::vector<StudyRowAblation>& rows) {
    std::string csv = "condition,A,M,B,Bjoint\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f\n", r.condition.c_str(), r.a,
                      r.m, r.b, r.b_joint);
        csv += line;
    }
    return csv;
}

std::string ablation_to_json(const std::vector<StudyRowAblation>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"condition", r.condition},
                       {"A", r.a},
                       {"M", r.m},
                       {"B", r.b},
                       {"Bjoint", r.b_joint}});
    return arr.dump(2) + "\n";
}

}  // namespace liftkit
