#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "liftkit/aggregate.hpp"
#include "liftkit/checkpoint.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/pipeline.hpp"
#include "liftkit/pose_io.hpp"
#include "liftkit/rng.hpp"
#include "liftkit/studies.hpp"
#include "liftkit/version.hpp"

namespace fs = std::filesystem;
using namespace liftkit;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write: " + path);
    out << text;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    PipelinePaths paths{cfg.out_dir};
    paths.create_dirs();
    const auto train_set = stage_gen_data(cfg, paths.train_data(), false);
    const auto test_set = stage_gen_data(cfg, paths.test_data(), true);
    std::cout << "wrote " << train_set.size() << " train / " << test_set.size()
              << " test samples under " << cfg.out_dir << "/data\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::uint64_t seed, bool seed_set,
              const std::string& resume) {
    require_file(data_path, "training data");
    const auto train_set = read_poses(data_path);
    fs::create_directories(out_dir);
    const std::string ckpt_path = out_dir + "/model.ckpt";

    if (!resume.empty()) {
        require_file(resume, "checkpoint");
        TrainerState state = load_checkpoint(resume);
        train(state, train_set, ckpt_path, [](const TrainerState& st, const EpochStats& s) {
            std::cerr << "[train] epoch " << st.epoch << "/" << st.config.epochs << " loss "
                      << s.mean_loss << "\n";
        });
        std::cout << "resumed to epoch " << state.epoch << ", checkpoint: " << ckpt_path << "\n";
        return 0;
    }

    if (config_path.empty()) throw ConfigError("train: --config is required unless resuming");
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    if (seed_set) cfg.seed = seed;
    const TrainerState state =
        stage_train(cfg, train_set, ckpt_path, mask_from_string(cfg.mask));
    std::cout << "trained " << state.epoch << " epochs, checkpoint: " << ckpt_path << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::string& data_path, int hypotheses,
               int steps, const std::string& variant, std::uint64_t seed,
               const std::string& out_path) {
    require_file(ckpt_path, "checkpoint");
    require_file(data_path, "data");
    const TrainerState state = load_checkpoint(ckpt_path);
    const auto frames = read_poses(data_path);
    SamplerConfig sc;
    sc.hypotheses = hypotheses;
    sc.steps = steps;
    sc.variant = variant;
    sc.seed = seed;
    const auto sets = stage_sample(state, frames, sc);
    write_hypotheses(out_path, sets);
    std::cout << "wrote " << sets.size() << " hypothesis sets (H=" << hypotheses
              << ", K=" << steps << ") to " << out_path << "\n";
    return 0;
}

int cmd_aggregate(const std::string& hyp_path, const std::string& strategy_name,
                  const std::string& gt_path, std::uint64_t seed, const std::string& out_path,
                  std::string csv_path) {
    require_file(hyp_path, "hypotheses file");
    const Strategy strategy = strategy_from_string(strategy_name);
    const auto sets = read_hypotheses(hyp_path);

    std::vector<const Pose3D*> gts(sets.size(), nullptr);
    std::vector<PoseSample> gt_samples;
    if (strategy == Strategy::kBest || strategy == Strategy::kBestJoint) {
        if (gt_path.empty())
            throw ConfigError("strategy " + strategy_name + " requires --gt");
        require_file(gt_path, "ground truth");
        gt_samples = read_poses(gt_path);
        std::map<std::string, const Pose3D*> by_id;
        for (const auto& s : gt_samples) by_id[s.sample_id] = &s.pose3d;
        for (size_t i = 0; i < sets.size(); ++i) {
            const auto it = by_id.find(sets[i].frame_id);
            if (it == by_id.end())
                throw ConfigError("no ground truth for frame '" + sets[i].frame_id + "'");
            gts[i] = it->second;
        }
    }

    std::vector<PredictedPose> preds;
    std::string csv = "frame_id,confidence\n";
    preds.reserve(sets.size());
    for (size_t i = 0; i < sets.size(); ++i) {
        const auto result = aggregate(sets[i], strategy, derive_seed(seed, 0xa66, i), gts[i]);
        preds.push_back({sets[i].frame_id, result.pose});
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%.9g\n", sets[i].frame_id.c_str(),
                      result.confidence ? *result.confidence : -1.0);
        csv += line;
    }
    write_predictions(out_path, preds);
    if (csv_path.empty()) csv_path = out_path + ".confidence.csv";
    write_text(csv_path, csv);
    std::cout << "aggregated " << preds.size() << " frames (" << strategy_name << ") to "
              << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, bool per_action,
             const std::string& out_path, const std::string& csv_path) {
    require_file(pred_path, "predictions");
    require_file(gt_path, "ground truth");
    const MetricReport report = evaluate_files(pred_path, gt_path, per_action);
    const std::string text = report_to_json(report);
    if (out_path.empty())
        std::cout << text;
    else
        write_text(out_path, text);
    if (!csv_path.empty()) write_text(csv_path, report_to_csv(report));
    std::cerr << "mpjpe " << report.overall.mpjpe_mm << " mm, p-mpjpe "
              << report.overall.p_mpjpe_mm << " mm over " << report.frame_count << " frames\n";
    return 0;
}

int cmd_study(const std::string& config_path, std::string kind) {
    const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    if (kind.empty()) kind = cfg.study_kind;
    PipelinePaths paths{cfg.out_dir};
    require_file(paths.test_data(), "test data (run `liftkit run` or `liftkit gen-data` first)");
    const auto test_set = read_poses(paths.test_data());
    fs::create_directories(fs::path(cfg.out_dir) / "reports");

    if (kind == "hcount") {
        require_file(paths.checkpoint(), "checkpoint (run `liftkit run` first)");
        const TrainerState state = load_checkpoint(paths.checkpoint());
        SamplerConfig sc;
        sc.hypotheses = cfg.hypotheses;
        sc.steps = cfg.steps;
        sc.variant = cfg.variant;
        sc.seed = derive_seed(cfg.seed, 0x5a3f);
        const auto rows =
            study_hypothesis_count(state, test_set, cfg.h_values, sc, cfg.seed);
        write_text(cfg.out_dir + "/reports/study_hcount.csv", hcount_to_csv(rows));
        write_text(cfg.out_dir + "/reports/study_hcount.json", hcount_to_json(rows));
        std::cout << "wrote reports/study_hcount.{csv,json}\n";
    } else if (kind == "confidence") {
        std::vector<HypothesisSet> sets;
        if (fs::exists(paths.hypotheses())) {
            sets = read_hypotheses(paths.hypotheses());
        } else {
            require_file(paths.checkpoint(), "checkpoint (run `liftkit run` first)");
            const TrainerState state = load_checkpoint(paths.checkpoint());
            SamplerConfig sc;
            sc.hypotheses = cfg.hypotheses;
            sc.steps = cfg.steps;
            sc.variant = cfg.variant;
            sc.seed = derive_seed(cfg.seed, 0x5a3f);
            sets = stage_sample(state, test_set, sc);
        }
        const auto rows = study_confidence(sets, test_set, cfg.recalls, cfg.strategy, cfg.seed);
        write_text(cfg.out_dir + "/reports/study_confidence.csv", confidence_to_csv(rows));
        write_text(cfg.out_dir + "/reports/study_confidence.json", confidence_to_json(rows));
        std::cout << "wrote reports/study_confidence.{csv,json}\n";
    } else if (kind == "ablation") {
        require_file(paths.train_data(), "train data (run `liftkit run` first)");
        const auto train_set = read_poses(paths.train_data());
        TrainerState base = [&] {
            if (fs::exists(paths.checkpoint())) {
                TrainerState s = load_checkpoint(paths.checkpoint());
                if (s.config.mask == ConditioningMask::kNone) return s;
            }
            return stage_train(cfg, train_set, paths.checkpoint(),
                               ConditioningMask::kNone);
        }();
        const auto rows = study_conditioning_ablation(cfg, train_set, test_set, &base,
                                                      cfg.out_dir + "/ckpt");
        write_text(cfg.out_dir + "/reports/study_ablation.csv", ablation_to_csv(rows));
        write_text(cfg.out_dir + "/reports/study_ablation.json", ablation_to_json(rows));
        std::cout << "wrote reports/study_ablation.{csv,json}\n";
    } else {
        throw ConfigError("unknown study kind: " + kind);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"liftkit: diffusion-based single-frame 2D-to-3D pose lifting"};
    app.set_version_flag("--version", kLiftkitVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, data_path, ckpt_path, resume, hyp_path, gt_path;
    std::string pred_path, out_path, csv_path, variant = "ddim", strategy = "M", study_kind;
    std::uint64_t seed = 0;
    int hypotheses = 20, steps = 20;
    bool per_action = false;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic pose dataset");
    gen->add_option("--config", config_path, "experiment config file")->required();
    gen->add_option("--out", out_dir, "output directory (defaults to config out_dir)");

    auto* train_cmd = app.add_subcommand("train", "train the denoiser");
    train_cmd->add_option("--config", config_path, "experiment config file");
    train_cmd->add_option("--data", data_path, "training dataset file")->required();
    train_cmd->add_option("--out", out_dir, "checkpoint output directory")->required();
    auto* seed_opt = train_cmd->add_option("--seed", seed, "override config seed");
    train_cmd->add_option("--resume", resume, "checkpoint to resume from");

    auto* sample_cmd = app.add_subcommand("sample", "draw multi-hypothesis predictions");
    sample_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    sample_cmd->add_option("--data", data_path, "frames to condition on")->required();
    sample_cmd->add_option("--hypotheses", hypotheses, "H, hypotheses per frame");
    sample_cmd->add_option("--steps", steps, "K, reverse iterations");
    sample_cmd->add_option("--variant", variant, "ddim | literal");
    sample_cmd->add_option("--seed", seed, "sampling seed");
    sample_cmd->add_option("--out", out_path, "hypotheses output file")->required();

    auto* agg_cmd = app.add_subcommand("aggregate", "collapse hypotheses to one pose");
    agg_cmd->add_option("--hypotheses", hyp_path, "hypotheses file")->required();
    agg_cmd->add_option("--strategy", strategy, "A | M | R | B | Bjoint");
    agg_cmd->add_option("--gt", gt_path, "ground truth (required for B/Bjoint)");
    agg_cmd->add_option("--seed", seed, "seed for random selection");
    agg_cmd->add_option("--out", out_path, "aggregated pose file")->required();
    agg_cmd->add_option("--csv", csv_path, "per-frame confidence CSV path");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions against ground truth");
    eval_cmd->add_option("--pred", pred_path, "predicted poses")->required();
    eval_cmd->add_option("--gt", gt_path, "ground truth dataset")->required();
    eval_cmd->add_flag("--per-action", per_action, "break metrics down by action tag");
    eval_cmd->add_option("--out", out_path, "report.json path (stdout when omitted)");
    eval_cmd->add_option("--csv", csv_path, "table-style CSV path");

    auto* study_cmd = app.add_subcommand("study", "hypothesis-count / confidence / ablation");
    study_cmd->add_option("--config", config_path, "experiment config file")->required();
    study_cmd->add_option("--kind", study_kind, "hcount | confidence | ablation");

    auto* run_cmd = app.add_subcommand("run", "full pipeline: gen-data through eval");
    run_cmd->add_option("--config", config_path, "experiment config file")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
        if (train_cmd->parsed())
            return cmd_train(config_path, data_path, out_dir, seed, seed_opt->count() > 0,
                             resume);
        if (sample_cmd->parsed())
            return cmd_sample(ckpt_path, data_path, hypotheses, steps, variant, seed, out_path);
        if (agg_cmd->parsed())
            return cmd_aggregate(hyp_path, strategy, gt_path, seed, out_path, csv_path);
        if (eval_cmd->parsed())
            return cmd_eval(pred_path, gt_path, per_action, out_path, csv_path);
        if (study_cmd->parsed()) return cmd_study(config_path, study_kind);
        if (run_cmd->parsed()) {
            run_pipeline(ExperimentConfig::from_file(config_path));
            std::cout << "pipeline complete, artifacts under "
                      << ExperimentConfig::from_file(config_path).out_dir << "\n";
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
