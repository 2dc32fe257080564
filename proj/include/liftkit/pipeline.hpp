#pragma once

#include <string>
#include <vector>

#include "liftkit/checkpoint.hpp"
#include "liftkit/config.hpp"
#include "liftkit/dataset.hpp"
#include "liftkit/sampler.hpp"

namespace liftkit {

// Fixed artifact layout under out_dir:
//   data/train.jsonl data/test.jsonl ckpt/model.ckpt hyp/hypotheses.jsonl
//   agg/pred.jsonl agg/confidence.csv reports/report.json reports/report.csv
//   manifest.json
struct PipelinePaths {
    std::string root;
    std::string train_data() const { return root + "/data/train.jsonl"; }
    std::string test_data() const { return root + "/data/test.jsonl"; }
    std::string checkpoint() const { return root + "/ckpt/model.ckpt"; }
    std::string hypotheses() const { return root + "/hyp/hypotheses.jsonl"; }
    std::string predictions() const { return root + "/agg/pred.jsonl"; }
    std::string confidence_csv() const { return root + "/agg/confidence.csv"; }
    std::string report_json() const { return root + "/reports/report.json"; }
    std::string report_csv() const { return root + "/reports/report.csv"; }
    std::string manifest() const { return root + "/manifest.json"; }
    void create_dirs() const;
};

// Building blocks shared by the pipeline and the standalone subcommands.
GeneratorConfig generator_config(const ExperimentConfig& cfg, bool test_split);
std::vector<PoseSample> stage_gen_data(const ExperimentConfig& cfg, const std::string& path,
                                       bool test_split);
TrainerState stage_train(const ExperimentConfig& cfg, const std::vector<PoseSample>& train_set,
                         const std::string& ckpt_path, ConditioningMask mask,
                         bool quiet = false);
std::vector<HypothesisSet> stage_sample(const TrainerState& state,
                                        const std::vector<PoseSample>& frames,
                                        const SamplerConfig& cfg);

// gen-data -> train -> sample -> aggregate -> eval, manifest updated after
// every stage. Rerunning with the same config is byte-identical.
void run_pipeline(const ExperimentConfig& cfg);

}  // namespace liftkit
