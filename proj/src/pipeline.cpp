#include "liftkit/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "liftkit/aggregate.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/pose_io.hpp"
#include "liftkit/rng.hpp"
#include "liftkit/version.hpp"

namespace liftkit {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelinePaths::create_dirs() const {
    for (const char* sub : {"data", "ckpt", "hyp", "agg", "reports"})
        fs::create_directories(fs::path(root) / sub);
}

GeneratorConfig generator_config(const ExperimentConfig& cfg, bool test_split) {
    GeneratorConfig g;
    g.count = test_split ? cfg.test_count : cfg.train_count;
    g.seed = derive_seed(cfg.seed, test_split ? 0x7e57 : 0x7121);
    g.noise_std_2d = cfg.noise_std_2d;
    g.camera.focal = cfg.camera_focal;
    g.camera.distance_mm = cfg.camera_distance_mm;
    g.max_angle_deg = cfg.max_angle_deg;
    g.action_count = cfg.action_count;
    g.id_prefix = test_split ? "test" : "train";
    g.features.levels = cfg.levels;
    g.features.dim = cfg.dim;
    g.features.lift_seed = cfg.lift_seed;
    g.features.quant_step = cfg.quant_step;
    g.features.depth_scale_mm = cfg.depth_scale_mm;
    g.context_seed = cfg.context_seed;
    g.context_depth_cue = cfg.depth_cue;
    return g;
}

std::vector<PoseSample> stage_gen_data(const ExperimentConfig& cfg, const std::string& path,
                                       bool test_split) {
    const SkeletonPreset preset = skeleton_preset(cfg.skeleton_preset);
    auto samples = generate_synthetic_dataset(preset.spec, preset.rest,
                                              generator_config(cfg, test_split));
    if (!path.empty()) write_poses(path, samples);
    return samples;
}

TrainerState stage_train(const ExperimentConfig& cfg, const std::vector<PoseSample>& train_set,
                         const std::string& ckpt_path, ConditioningMask mask, bool quiet) {
    const SkeletonPreset preset = skeleton_preset(cfg.skeleton_preset);
    DenoiserConfig mc;
    mc.levels = cfg.levels;
    mc.dim = cfg.dim;
    mc.heads = cfg.heads;
    mc.p2c_blocks = cfg.p2c_blocks;
    mc.j2j_blocks = cfg.j2j_blocks;
    mc.ffn_mult = cfg.ffn_mult;
    mc.channel_tokens = cfg.channel_tokens;
    mc.init_seed = derive_seed(cfg.seed, cfg.init_seed);

    TrainConfig tc;
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.epochs;
    tc.lr_start = cfg.lr_start;
    tc.lr_decay = cfg.lr_decay;
    tc.flip_prob = cfg.flip_prob;
    tc.seed = derive_seed(cfg.seed, 0x7ea1);
    tc.scale_mm = cfg.scale_mm;
    tc.grad_clip = cfg.grad_clip;
    tc.mask = mask;

    const DiffusionSchedule schedule =
        build_schedule(cfg.schedule_kind, cfg.total_steps, cfg.beta_start, cfg.beta_end);
    TrainerState state(mc, schedule, tc, preset.spec);
    train(state, train_set, ckpt_path,
          [&](const TrainerState& st, const EpochStats& stats) {
              if (!quiet)
                  std::cerr << "[train] epoch " << st.epoch << "/" << st.config.epochs
                            << " loss " << stats.mean_loss << " lr " << stats.lr << "\n";
          });
    return state;
}

std::vector<HypothesisSet> stage_sample(const TrainerState& state,
                                        const std::vector<PoseSample>& frames,
                                        const SamplerConfig& cfg) {
    std::vector<HypothesisSet> sets;
    sets.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        SamplerConfig frame_cfg = cfg;
        frame_cfg.seed = derive_seed(cfg.seed, 0xf7a3e, i);
        HypothesisSet hs = sample_frame(state.model, state.schedule, frames[i].features,
                                        frames[i].sample_id, frame_cfg,
                                        state.config.scale_mm, state.config.mask);
        hs.config.seed = cfg.seed;  // the file records the run seed
        sets.push_back(std::move(hs));
    }
    return sets;
}

namespace {

void write_manifest(const PipelinePaths& paths, const ExperimentConfig& cfg,
                    const std::vector<std::string>& stages_completed,
                    const std::string& failed_stage, const std::string& error) {
    json m;
    m["config"] = json::parse(cfg.to_json());
    m["config_hash"] = cfg.content_hash();
    m["seed"] = cfg.seed;
    m["versions"] = {{"liftkit", kLiftkitVersion}, {"format", 1}};
    m["stages_completed"] = stages_completed;
    m["artifacts"] = {{"train_data", paths.train_data()},
                      {"test_data", paths.test_data()},
                      {"checkpoint", paths.checkpoint()},
                      {"hypotheses", paths.hypotheses()},
                      {"predictions", paths.predictions()},
                      {"confidence_csv", paths.confidence_csv()},
                      {"report_json", paths.report_json()},
                      {"report_csv", paths.report_csv()}};
    if (!failed_stage.empty()) {
        m["failed_stage"] = failed_stage;
        m["error"] = error;
    }
    std::ofstream out(paths.manifest(), std::ios::binary);
    out << m.dump(2) << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write: " + path);
    out << text;
}

}  // namespace

void run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    PipelinePaths paths{cfg.out_dir};
    paths.create_dirs();

    std::vector<std::string> done;
    std::string stage = "gen-data";
    write_manifest(paths, cfg, done, {}, {});
    try {
        const auto train_set = stage_gen_data(cfg, paths.train_data(), false);
        const auto test_set = stage_gen_data(cfg, paths.test_data(), true);
        done.push_back(stage);
        write_manifest(paths, cfg, done, {}, {});

        stage = "train";
        const TrainerState state = stage_train(cfg, train_set, paths.checkpoint(),
                                               mask_from_string(cfg.mask));
        done.push_back(stage);
        write_manifest(paths, cfg, done, {}, {});

        stage = "sample";
        SamplerConfig sc;
        sc.hypotheses = cfg.hypotheses;
        sc.steps = cfg.steps;
        sc.variant = cfg.variant;
        sc.seed = derive_seed(cfg.seed, 0x5a3f);
        const auto sets = stage_sample(state, test_set, sc);
        write_hypotheses(paths.hypotheses(), sets);
        done.push_back(stage);
        write_manifest(paths, cfg, done, {}, {});

        stage = "aggregate";
        const Strategy strategy = strategy_from_string(cfg.strategy);
        std::vector<PredictedPose> preds;
        std::string conf_csv = "frame_id,confidence\n";
        preds.reserve(sets.size());
        for (size_t i = 0; i < sets.size(); ++i) {
            const Pose3D* gt = nullptr;
            if (strategy == Strategy::kBest || strategy == Strategy::kBestJoint)
                gt = &test_set[i].pose3d;
            const auto result =
                aggregate(sets[i], strategy, derive_seed(cfg.seed, 0xa66, i), gt);
            preds.push_back({sets[i].frame_id, result.pose});
            char line[128];
            std::snprintf(line, sizeof(line), "%s,%.9g\n", sets[i].frame_id.c_str(),
                          result.confidence ? *result.confidence : -1.0);
            conf_csv += line;
        }
        write_predictions(paths.predictions(), preds);
        write_text(paths.confidence_csv(), conf_csv);
        done.push_back(stage);
        write_manifest(paths, cfg, done, {}, {});

        stage = "eval";
        const MetricReport report =
            evaluate_files(paths.predictions(), paths.test_data(), cfg.per_action);
        write_text(paths.report_json(), report_to_json(report));
        write_text(paths.report_csv(), report_to_csv(report));
        done.push_back(stage);
        write_manifest(paths, cfg, done, {}, {});
    } catch (const std::exception& e) {
        write_manifest(paths, cfg, done, stage, e.what());
        throw;
    }
}

}  // namespace liftkit
