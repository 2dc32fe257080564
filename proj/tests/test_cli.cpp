#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "liftkit/aggregate.hpp"
#include "liftkit/config.hpp"
#include "liftkit/errors.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/pipeline.hpp"
#include "liftkit/pose_io.hpp"
#include "liftkit/studies.hpp"
#include "test_support.hpp"

using namespace liftkit;

namespace {

std::string mini_config_text(const std::string& out_dir) {
    return "# desk-scale smoke configuration\n"
           "[experiment]\n"
           "out_dir = " + out_dir + "\n"
           "seed = 424242\n"
           "[data]\n"
           "train_count = 60\n"
           "test_count = 12\n"
           "noise_std_2d = 0.03\n"
           "action_count = 2\n"
           "[model]\n"
           "levels = 2\n"
           "dim = 8\n"
           "heads = 2\n"
           "p2c_blocks = 1\n"
           "j2j_blocks = 1\n"
           "[schedule]\n"
           "total_steps = 50\n"
           "[train]\n"
           "batch_size = 16\n"
           "epochs = 2\n"
           "[sample]\n"
           "hypotheses = 3\n"
           "steps = 5\n"
           "[study]\n"
           "h_values = 1, 2, 3\n"
           "recalls = 1.0, 0.75, 0.5\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("ini parsing") {
    const auto ini = IniFile::from_string(
        "top = 1\n"
        "[alpha]\n"
        "name = hello world  # trailing comment\n"
        "count = 42\n"
        "ratio = 0.25\n"
        "flag = true\n"
        "items = 1, 2, 3\n"
        "; full-line comment\n"
        "[beta]\n"
        "empty_ok =\n");
    CHECK(ini.get_string("", "top", "") == "1");
    CHECK(ini.get_string("alpha", "name", "") == "hello world");
    CHECK(ini.get_int("alpha", "count", 0) == 42);
    CHECK(ini.get_double("alpha", "ratio", 0.0) == doctest::Approx(0.25));
    CHECK(ini.get_bool("alpha", "flag", false));
    CHECK(ini.get_int_list("alpha", "items", {}) == std::vector<int>{1, 2, 3});
    CHECK(ini.get_int("alpha", "missing", 7) == 7);
    CHECK(ini.get_string("beta", "empty_ok", "fallback") == "");

    CHECK_THROWS_AS(ini.get_int("alpha", "name", 0), ConfigError);
    CHECK_THROWS_AS(IniFile::from_string("[oops\nk = v\n"), ConfigError);
    CHECK_THROWS_AS(IniFile::from_string("[a]\nk = 1\nk = 2\n"), ConfigError);
    CHECK_THROWS_AS(IniFile::from_string("[a]\njust a line\n"), ConfigError);
}

TEST_CASE("experiment config resolution") {
    SUBCASE("defaults materialize and unknown keys are rejected") {
        const auto cfg = ExperimentConfig::from_ini(IniFile::from_string(
            "[experiment]\nout_dir = /tmp/x\nseed = 5\n"));
        CHECK(cfg.levels == 4);
        CHECK(cfg.dim == 32);
        CHECK(cfg.hypotheses == 20);
        CHECK(cfg.steps == 20);
        CHECK(cfg.batch_size == 128);
        CHECK(cfg.lr_start == doctest::Approx(6e-4));
        CHECK(cfg.lr_decay == doctest::Approx(0.993));

        CHECK_THROWS_AS(ExperimentConfig::from_ini(IniFile::from_string(
                            "[experiment]\nout_dir = /tmp/x\nseed = 5\n[train]\nlr = 1\n")),
                        ConfigError);
    }
    SUBCASE("the seed is mandatory") {
        CHECK_THROWS_AS(
            ExperimentConfig::from_ini(IniFile::from_string("[experiment]\nout_dir = /tmp/x\n")),
            ConfigError);
    }
    SUBCASE("validation catches bad combinations before any compute") {
        auto text = [](const std::string& extra) {
            return "[experiment]\nout_dir = /tmp/x\nseed = 1\n" + extra;
        };
        CHECK_THROWS_AS(ExperimentConfig::from_ini(IniFile::from_string(
                            text("[sample]\nsteps = 2000\n"))),
                        ConfigError);
        CHECK_THROWS_AS(ExperimentConfig::from_ini(IniFile::from_string(
                            text("[sample]\nvariant = euler\n"))),
                        ConfigError);
        CHECK_THROWS_AS(ExperimentConfig::from_ini(IniFile::from_string(
                            text("[study]\nrecalls = 0.0\n"))),
                        ConfigError);
        CHECK_THROWS_AS(
            ExperimentConfig::from_ini(IniFile::from_string("[experiment]\nseed = 1\n")),
            ConfigError);
    }
    SUBCASE("content hash changes iff the resolved config changes") {
        const auto a = ExperimentConfig::from_ini(
            IniFile::from_string("[experiment]\nout_dir = /tmp/x\nseed = 5\n"));
        const auto b = ExperimentConfig::from_ini(
            IniFile::from_string("# cosmetic\n[experiment]\nout_dir = /tmp/x\nseed = 5\n"));
        auto c = a;
        c.lr_start = 1e-3;
        CHECK(a.content_hash() == b.content_hash());
        CHECK(a.content_hash() != c.content_hash());
        CHECK(a.to_json() == b.to_json());
    }
}

TEST_CASE("pipeline end to end at mini scale") {
    const auto root = test::scratch_dir("pipeline");
    const auto cfg_a = ExperimentConfig::from_ini(IniFile::from_string(mini_config_text(root + "/run_a")));
    const auto cfg_b = ExperimentConfig::from_ini(IniFile::from_string(mini_config_text(root + "/run_b")));

    run_pipeline(cfg_a);
    run_pipeline(cfg_b);

    PipelinePaths pa{cfg_a.out_dir}, pb{cfg_b.out_dir};

    SUBCASE("all artifacts exist and the manifest records every stage") {
        for (const auto& path : {pa.train_data(), pa.test_data(), pa.checkpoint(),
                                 pa.hypotheses(), pa.predictions(), pa.confidence_csv(),
                                 pa.report_json(), pa.report_csv(), pa.manifest()})
            CHECK(std::filesystem::exists(path));
        const auto manifest = nlohmann::json::parse(read_file(pa.manifest()));
        CHECK(manifest["stages_completed"].size() == 5);
        CHECK(manifest["config_hash"] == cfg_a.content_hash());
        CHECK(manifest["seed"] == 424242);
        CHECK_FALSE(manifest.contains("failed_stage"));
    }

    SUBCASE("identical configs produce byte-identical numerical artifacts") {
        CHECK(read_file(pa.report_json()) == read_file(pb.report_json()));
        CHECK(read_file(pa.checkpoint()) == read_file(pb.checkpoint()));
        CHECK(read_file(pa.hypotheses()) == read_file(pb.hypotheses()));
        CHECK(read_file(pa.predictions()) == read_file(pb.predictions()));
    }

    SUBCASE("oracle selection beats random selection on the same hypotheses file") {
        const auto sets = read_hypotheses(pa.hypotheses());
        const auto gt = read_poses(pa.test_data());
        REQUIRE(sets.size() == gt.size());
        double best_sum = 0.0, random_sum = 0.0;
        for (size_t i = 0; i < sets.size(); ++i) {
            best_sum += mpjpe(select_best(sets[i], gt[i].pose3d).pose, gt[i].pose3d);
            random_sum += mpjpe(select_random(sets[i], 1000 + i).pose, gt[i].pose3d);
        }
        CHECK(best_sum <= random_sum + 1e-9);
    }

    SUBCASE("hypothesis-count study rows and oracle monotonicity") {
        const TrainerState state = load_checkpoint(pa.checkpoint());
        const auto test_set = read_poses(pa.test_data());
        SamplerConfig sc;
        sc.hypotheses = cfg_a.hypotheses;
        sc.steps = cfg_a.steps;
        sc.seed = derive_seed(cfg_a.seed, 0x5a3f);
        const auto rows = study_hypothesis_count(state, test_set, cfg_a.h_values, sc, cfg_a.seed);
        CHECK(rows.size() == cfg_a.h_values.size() * 5);
        double prev_best = std::numeric_limits<double>::infinity();
        double prev_bjoint = std::numeric_limits<double>::infinity();
        for (const auto& row : rows) {
            if (row.strategy == "B") {
                CHECK(row.mpjpe_mm <= prev_best + 1e-12);
                prev_best = row.mpjpe_mm;
            }
            if (row.strategy == "Bjoint") {
                CHECK(row.mpjpe_mm <= prev_bjoint + 1e-12);
                prev_bjoint = row.mpjpe_mm;
            }
        }
        CHECK(hcount_to_csv(rows).find("H,strategy,mpjpe_mm") == 0);
    }

    SUBCASE("confidence study rows are sorted and anchored at recall 1") {
        const auto sets = read_hypotheses(pa.hypotheses());
        const auto test_set = read_poses(pa.test_data());
        const auto rows = study_confidence(sets, test_set, {0.5, 1.0, 0.75}, "M", cfg_a.seed);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].recall == doctest::Approx(1.0));
        CHECK(rows[1].recall == doctest::Approx(0.75));
        CHECK(rows[2].recall == doctest::Approx(0.5));
        CHECK(rows[0].kept_frames == rows[0].total_frames);
        CHECK(rows[0].kept_mpjpe_mm == doctest::Approx(rows[0].full_mpjpe_mm).epsilon(1e-12));
        CHECK(confidence_to_csv(rows).find("recall,") == 0);
    }

    SUBCASE("ablation study emits the 3x4 grid") {
        const auto train_set = read_poses(pa.train_data());
        const auto test_set = read_poses(pa.test_data());
        const TrainerState base = load_checkpoint(pa.checkpoint());
        const auto rows = study_conditioning_ablation(cfg_a, train_set, test_set, &base, "");
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].condition == "pose");
        CHECK(rows[1].condition == "context");
        CHECK(rows[2].condition == "pose+context");
        for (const auto& r : rows) {
            CHECK(r.a > 0.0);
            CHECK(r.m > 0.0);
            CHECK(r.b_joint <= r.b + 1e-9);
        }
        const std::string csv = ablation_to_csv(rows);
        CHECK(csv.find("condition,A,M,B,Bjoint") == 0);
    }
}

#ifdef LIFTKIT_BIN_PATH
TEST_CASE("command line interface") {
    const auto root = test::scratch_dir("cli");
    const std::string cfg_path = root + "/mini.ini";
    write_file(cfg_path, mini_config_text(root + "/run"));
    const std::string bin = LIFTKIT_BIN_PATH;

    auto run = [&](const std::string& args) {
        const std::string cmd = bin + " " + args + " >" + root + "/stdout.txt 2>" + root +
                                "/stderr.txt";
        const int status = std::system(cmd.c_str());
        return status == -1 ? -1 : WEXITSTATUS(status);
    };

    SUBCASE("version and help") {
        CHECK(run("--version") == 0);
        CHECK(run("--help") == 0);
    }

    SUBCASE("full pipeline, then re-aggregation and evaluation") {
        REQUIRE(run("run --config " + cfg_path) == 0);
        PipelinePaths paths{root + "/run"};
        CHECK(std::filesystem::exists(paths.report_json()));

        CHECK(run("aggregate --hypotheses " + paths.hypotheses() + " --strategy A --out " +
                  root + "/avg.jsonl") == 0);
        CHECK(run("eval --pred " + root + "/avg.jsonl --gt " + paths.test_data() +
                  " --per-action --out " + root + "/avg_report.json") == 0);
        CHECK(std::filesystem::exists(root + "/avg_report.json"));
        CHECK(std::filesystem::exists(root + "/avg.jsonl.confidence.csv"));

        CHECK(run("study --config " + cfg_path + " --kind confidence") == 0);
        CHECK(std::filesystem::exists(root + "/run/reports/study_confidence.csv"));
    }

    SUBCASE("validation failures exit with code 2") {
        CHECK(run("eval --pred /nonexistent.jsonl --gt /nonexistent.jsonl") == 2);
        CHECK(run("run --config /nonexistent.ini") == 2);
        write_file(root + "/broken.ini", "[experiment]\nout_dir = " + root + "/x\n");
        CHECK(run("run --config " + root + "/broken.ini") == 2);  // missing seed
        write_file(root + "/unknown.ini",
                   "[experiment]\nout_dir = " + root + "/x\nseed = 1\nturbo = yes\n");
        CHECK(run("run --config " + root + "/unknown.ini") == 2);
    }

    SUBCASE("aggregate with strategy B without ground truth exits 2") {
        REQUIRE(run("run --config " + cfg_path) == 0);
        PipelinePaths paths{root + "/run"};
        CHECK(run("aggregate --hypotheses " + paths.hypotheses() + " --strategy B --out " +
                  root + "/b.jsonl") == 2);
    }
}
#endif
