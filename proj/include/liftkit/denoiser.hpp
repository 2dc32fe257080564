#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftkit/features.hpp"
#include "liftkit/types.hpp"

namespace liftkit {

// Which conditioning channels the model sees. Ablations keep the tensor shape
// and zero the masked channels at assembly, so masked values never reach the
// network and carry no gradient.
enum class ConditioningMask { kNone, kPoseOnly, kContextOnly };

ConditioningMask mask_from_string(const std::string& s);
std::string mask_to_string(ConditioningMask m);

struct DenoiserConfig {
    int levels = 4;      // L context channels; the model consumes c = L + 2 channels
    int dim = 32;        // d, embedding size per (channel, joint)
    int heads = 2;
    int p2c_blocks = 2;  // channel-token attention depth
    int j2j_blocks = 2;  // joint-token attention depth
    int ffn_mult = 2;
    // "flattened": one softmax over channels, scores summed over joints (token = d x J)
    // "per_joint": independent softmax per joint
    std::string channel_tokens = "flattened";
    std::uint64_t init_seed = 1;

    int channels() const { return levels + 2; }
    void validate() const;
};

// Sinusoidal encoding, values in [-1, 1]:
//   f[2i] = sin(t / 10000^{2i/d}), f[2i+1] = cos(t / 10000^{2i/d})
template <typename S>
VecX<S> embed_timestep(int t, int dim);

template <typename S>
struct ParamBlock {
    std::string name;
    Eigen::Index offset = 0, rows = 0, cols = 0;
    Eigen::Index size() const { return rows * cols; }
};

// All learnable tensors live in one flat vector, registered in declaration
// order (the checkpoint writes them in this order). Gradients share the layout.
template <typename S>
class ParamStore {
public:
    int add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

    Eigen::Map<MatX<S>> mat(int id) { return view(values_, id); }
    Eigen::Map<const MatX<S>> mat(int id) const { return view(values_, id); }
    Eigen::Map<MatX<S>> grad(int id) { return view(grads_, id); }
    Eigen::Map<const MatX<S>> grad(int id) const { return view(grads_, id); }

    VecX<S>& values() { return values_; }
    const VecX<S>& values() const { return values_; }
    VecX<S>& grads() { return grads_; }
    const VecX<S>& grads() const { return grads_; }
    void zero_grads() { grads_.setZero(); }

    const std::vector<ParamBlock<S>>& blocks() const { return blocks_; }
    Eigen::Index size() const { return values_.size(); }

private:
    Eigen::Map<MatX<S>> view(VecX<S>& v, int id) {
        const auto& b = blocks_[id];
        return {v.data() + b.offset, b.rows, b.cols};
    }
    Eigen::Map<const MatX<S>> view(const VecX<S>& v, int id) const {
        const auto& b = blocks_[id];
        return {v.data() + b.offset, b.rows, b.cols};
    }

    std::vector<ParamBlock<S>> blocks_;
    VecX<S> values_;
    VecX<S> grads_;
};

namespace detail {
struct LinearIds {
    int w = -1, b = -1;
};
struct NormIds {
    int gamma = -1, beta = -1;
};
struct AttnBlockIds {
    NormIds ln1;
    LinearIds q, k, v, o;
    NormIds ln2;
    LinearIds ff1, ff2;
};
}  // namespace detail

// Saved intermediates of one forward pass, consumed by backward().
template <typename S>
struct ForwardTrace {
    int batch = 0, joints = 0;
    ConditioningMask mask = ConditioningMask::kNone;
    MatX<S> y_in;  // (B*J) x 3 scaled noisy poses
    MatX<S> x0;    // assembled (B*c*J) x d tensor
    struct Block {
        MatX<S> xhat1;
        VecX<S> inv1;
        MatX<S> q, k, v;
        std::vector<MatX<S>> attn;  // softmax weights, one matrix per (b, head[, joint])
        MatX<S> attn_cat;
        MatX<S> xhat2;
        VecX<S> inv2;
        MatX<S> ff_pre, ff_act;
        MatX<S> x_in, x_mid;
    };
    std::vector<Block> p2c, j2j;
    MatX<S> fuse_in;   // (B*J) x (c*d)
    MatX<S> fuse_out;  // (B*J) x d
};

// Conditional noise predictor eps_hat = D(y_t, F, f_t). Two attention stages:
// channel tokens first (context sharing per joint), joint tokens second. All
// projections are d-dimensional and shared across positions, so the model is
// independent of J and equivariant to joint permutations.
template <typename S>
class DenoiserT {
public:
    explicit DenoiserT(const DenoiserConfig& cfg);

    const DenoiserConfig& config() const { return cfg_; }
    ParamStore<S>& params() { return params_; }
    const ParamStore<S>& params() const { return params_; }

    void init_params(std::uint64_t seed);

    // Single-sample convenience; y_t is J x 3 in diffusion (scaled) units.
    MatX<S> forward(const MatX<S>& y_t, const ConditioningFeatures& F, int t,
                    ConditioningMask mask = ConditioningMask::kNone) const;

    // Batched path. Y is (B*J) x 3; features holds B tensors (may repeat);
    // ts holds B timesteps. Returns eps_hat as (B*J) x 3. When trace is given,
    // intermediates are kept for backward().
    MatX<S> forward_batch(const MatX<S>& Y,
                          const std::vector<const ConditioningFeatures*>& features,
                          const std::vector<int>& ts,
                          ConditioningMask mask = ConditioningMask::kNone,
                          ForwardTrace<S>* trace = nullptr) const;

    // Accumulates parameter gradients for d(loss)/d(eps_hat) = d_eps. Optional
    // outputs: gradient w.r.t. the scaled noisy pose and w.r.t. F (per batch
    // tensor, channels 0..L only; masked channels come back zero).
    void backward(const ForwardTrace<S>& trace, const MatX<S>& d_eps,
                  MatX<S>* d_y = nullptr, std::vector<MatX<S>>* d_features = nullptr);

    // The assembled c*J x d input for one sample (channel L+1 is the projected
    // noisy pose, f_t broadcast-added everywhere).
    MatX<S> assemble_input(const MatX<S>& y_t, const ConditioningFeatures& F, int t,
                           ConditioningMask mask = ConditioningMask::kNone) const;

private:
    MatX<S> assemble_batch(const MatX<S>& Y,
                           const std::vector<const ConditioningFeatures*>& features,
                           const std::vector<int>& ts, ConditioningMask mask) const;
    void run_stage(const std::vector<detail::AttnBlockIds>& ids, bool channel_stage,
                   int batch, int joints, MatX<S>& x,
                   std::vector<typename ForwardTrace<S>::Block>* blocks) const;
    void backward_stage(const std::vector<detail::AttnBlockIds>& ids, bool channel_stage,
                        int batch, int joints,
                        const std::vector<typename ForwardTrace<S>::Block>& blocks,
                        MatX<S>& dx);

    DenoiserConfig cfg_;
    ParamStore<S> params_;
    detail::LinearIds pose_in_;
    std::vector<detail::AttnBlockIds> p2c_, j2j_;
    detail::LinearIds fuse_, head_;
};

using Denoiser = DenoiserT<float>;

extern template class DenoiserT<float>;
extern template class DenoiserT<double>;
extern template VecX<float> embed_timestep<float>(int, int);
extern template VecX<double> embed_timestep<double>(int, int);

}  // namespace liftkit
