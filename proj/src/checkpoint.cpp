#include "liftkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "liftkit/errors.hpp"
#include "liftkit/version.hpp"

namespace liftkit {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {

constexpr char kMagic[8] = {'L', 'I', 'F', 'T', 'K', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T* data, size_t count) {
    out.write(reinterpret_cast<const char*>(data), sizeof(T) * count);
}

template <typename T>
void read_raw(std::istream& in, T* data, size_t count) {
    in.read(reinterpret_cast<char*>(data), sizeof(T) * count);
    if (!in) throw CheckpointError("checkpoint truncated");
}

void write_f64_vec(std::ostream& out, const std::vector<double>& v) {
    write_raw(out, v.data(), v.size());
}

std::vector<double> read_f64_vec(std::istream& in, size_t n) {
    std::vector<double> v(n);
    read_raw(in, v.data(), n);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerState& state) {
    json meta;
    meta["format_version"] = kVersion;
    meta["liftkit_version"] = kLiftkitVersion;
    const auto& mc = state.model.config();
    meta["model"] = {{"levels", mc.levels},
                     {"dim", mc.dim},
                     {"heads", mc.heads},
                     {"p2c_blocks", mc.p2c_blocks},
                     {"j2j_blocks", mc.j2j_blocks},
                     {"ffn_mult", mc.ffn_mult},
                     {"channel_tokens", mc.channel_tokens},
                     {"init_seed", mc.init_seed}};
    const auto& tc = state.config;
    meta["train"] = {{"batch_size", tc.batch_size}, {"epochs", tc.epochs},
                     {"lr_start", tc.lr_start},     {"lr_decay", tc.lr_decay},
                     {"flip_prob", tc.flip_prob},   {"seed", tc.seed},
                     {"scale_mm", tc.scale_mm},     {"grad_clip", tc.grad_clip},
                     {"mask", mask_to_string(tc.mask)}};
    meta["skeleton"] = {{"name", state.skeleton.name},
                        {"joint_count", state.skeleton.joint_count},
                        {"parents", state.skeleton.parents},
                        {"bone_lengths", state.skeleton.bone_lengths},
                        {"mirror_map", state.skeleton.mirror_map}};
    meta["schedule"] = {{"total_steps", state.schedule.total_steps}};
    meta["optimizer"] = {{"lr", state.optimizer.lr},
                         {"beta1", state.optimizer.beta1},
                         {"beta2", state.optimizer.beta2},
                         {"epsilon", state.optimizer.epsilon},
                         {"step_count", state.optimizer.step_count}};
    meta["epoch"] = state.epoch;
    meta["rng"] = {{"scheme", "per-epoch-derived"},
                   {"seed", tc.seed},
                   {"next_epoch", state.epoch}};
    meta["param_count"] = state.model.params().size();
    json blocks = json::array();
    for (const auto& b : state.model.params().blocks())
        blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    meta["param_blocks"] = blocks;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, &kVersion, 1);
    const std::string meta_str = meta.dump();
    const std::uint64_t meta_len = meta_str.size();
    write_raw(out, &meta_len, 1);
    out.write(meta_str.data(), meta_str.size());

    write_raw(out, state.model.params().values().data(), state.model.params().size());
    write_f64_vec(out, state.schedule.betas);
    write_f64_vec(out, state.schedule.alphas);
    write_f64_vec(out, state.schedule.alpha_bars);
    write_f64_vec(out, state.schedule.posterior_betas);
    write_raw(out, state.optimizer.m.data(), state.optimizer.m.size());
    write_raw(out, state.optimizer.v.data(), state.optimizer.v.size());
    if (!out) throw CheckpointError("write failed: " + path);
}

TrainerState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open: " + path);
    char magic[8];
    read_raw(in, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw CheckpointError("bad magic bytes, not a liftkit checkpoint: " + path);
    std::uint32_t version = 0;
    read_raw(in, &version, 1);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t meta_len = 0;
    read_raw(in, &meta_len, 1);
    std::string meta_str(meta_len, '\0');
    read_raw(in, meta_str.data(), meta_len);
    json meta = json::parse(meta_str, nullptr, false);
    if (meta.is_discarded()) throw CheckpointError("corrupt checkpoint metadata");

    DenoiserConfig mc;
    const json& jm = meta.at("model");
    mc.levels = jm.at("levels").get<int>();
    mc.dim = jm.at("dim").get<int>();
    mc.heads = jm.at("heads").get<int>();
    mc.p2c_blocks = jm.at("p2c_blocks").get<int>();
    mc.j2j_blocks = jm.at("j2j_blocks").get<int>();
    mc.ffn_mult = jm.at("ffn_mult").get<int>();
    mc.channel_tokens = jm.at("channel_tokens").get<std::string>();
    mc.init_seed = jm.at("init_seed").get<std::uint64_t>();

    TrainConfig tc;
    const json& jt = meta.at("train");
    tc.batch_size = jt.at("batch_size").get<int>();
    tc.epochs = jt.at("epochs").get<int>();
    tc.lr_start = jt.at("lr_start").get<double>();
    tc.lr_decay = jt.at("lr_decay").get<double>();
    tc.flip_prob = jt.at("flip_prob").get<double>();
    tc.seed = jt.at("seed").get<std::uint64_t>();
    tc.scale_mm = jt.at("scale_mm").get<double>();
    tc.grad_clip = jt.at("grad_clip").get<double>();
    tc.mask = mask_from_string(jt.at("mask").get<std::string>());

    SkeletonSpec skel;
    const json& js = meta.at("skeleton");
    skel.name = js.at("name").get<std::string>();
    skel.joint_count = js.at("joint_count").get<int>();
    skel.parents = js.at("parents").get<std::vector<int>>();
    skel.bone_lengths = js.at("bone_lengths").get<std::vector<double>>();
    skel.mirror_map = js.at("mirror_map").get<std::vector<int>>();

    DiffusionSchedule sched;
    sched.total_steps = meta.at("schedule").at("total_steps").get<int>();

    const auto param_count = meta.at("param_count").get<Eigen::Index>();
    const size_t T = static_cast<size_t>(sched.total_steps);

    // placeholder schedule arrays so the constructor's validate() passes;
    // the real arrays are read right below
    sched.betas.assign(T, 0.5);
    sched.alphas.assign(T, 0.5);
    sched.alpha_bars.resize(T);
    sched.posterior_betas.assign(T, 0.5);
    double bar = 1.0;
    for (size_t i = 0; i < T; ++i) sched.alpha_bars[i] = (bar *= 0.5);

    TrainerState state(mc, sched, tc, skel);
    if (state.model.params().size() != param_count)
        throw CheckpointError("parameter count mismatch: checkpoint has " +
                              std::to_string(param_count));
    const json& jb = meta.at("param_blocks");
    const auto& blocks = state.model.params().blocks();
    if (jb.size() != blocks.size()) throw CheckpointError("parameter block list mismatch");
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (jb[i].at("name").get<std::string>() != blocks[i].name ||
            jb[i].at("rows").get<Eigen::Index>() != blocks[i].rows ||
            jb[i].at("cols").get<Eigen::Index>() != blocks[i].cols)
            throw CheckpointError("parameter block mismatch at '" + blocks[i].name + "'");
    }

    read_raw(in, state.model.params().values().data(), param_count);
    state.schedule.betas = read_f64_vec(in, T);
    state.schedule.alphas = read_f64_vec(in, T);
    state.schedule.alpha_bars = read_f64_vec(in, T);
    state.schedule.posterior_betas = read_f64_vec(in, T);
    state.schedule.validate();

    const json& jo = meta.at("optimizer");
    state.optimizer.lr = jo.at("lr").get<double>();
    state.optimizer.beta1 = jo.at("beta1").get<double>();
    state.optimizer.beta2 = jo.at("beta2").get<double>();
    state.optimizer.epsilon = jo.at("epsilon").get<double>();
    state.optimizer.step_count = jo.at("step_count").get<std::int64_t>();
    state.optimizer.m.resize(param_count);
    state.optimizer.v.resize(param_count);
    read_raw(in, state.optimizer.m.data(), param_count);
    read_raw(in, state.optimizer.v.data(), param_count);

    state.epoch = meta.at("epoch").get<int>();
    return state;
}

}  // namespace liftkit
