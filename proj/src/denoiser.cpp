#include "liftkit/denoiser.hpp"

#include <cmath>

#include "liftkit/errors.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

ConditioningMask mask_from_string(const std::string& s) {
    if (s == "none" || s.empty()) return ConditioningMask::kNone;
    if (s == "pose_only") return ConditioningMask::kPoseOnly;
    if (s == "context_only") return ConditioningMask::kContextOnly;
    throw ConfigError("unknown conditioning mask: " + s);
}

std::string mask_to_string(ConditioningMask m) {
    switch (m) {
        case ConditioningMask::kNone: return "none";
        case ConditioningMask::kPoseOnly: return "pose_only";
        case ConditioningMask::kContextOnly: return "context_only";
    }
    return "none";
}

void DenoiserConfig::validate() const {
    if (levels < 1) throw ConfigError("denoiser: levels must be >= 1");
    if (dim < 1 || heads < 1 || dim % heads != 0)
        throw ConfigError("denoiser: heads must divide dim");
    if (p2c_blocks < 1 || j2j_blocks < 1)
        throw ConfigError("denoiser: need at least one block per stage");
    if (ffn_mult < 1) throw ConfigError("denoiser: ffn_mult must be >= 1");
    if (channel_tokens != "flattened" && channel_tokens != "per_joint")
        throw ConfigError("denoiser: channel_tokens must be 'flattened' or 'per_joint'");
}

template <typename S>
VecX<S> embed_timestep(int t, int dim) {
    if (t < 0) throw ConfigError("timestep embedding: t must be >= 0");
    VecX<S> f(dim);
    for (int k = 0; k < dim; k += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(k) / dim);
        f(k) = static_cast<S>(std::sin(t * freq));
        if (k + 1 < dim) f(k + 1) = static_cast<S>(std::cos(t * freq));
    }
    return f;
}

template <typename S>
int ParamStore<S>::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    ParamBlock<S> b{name, values_.size(), rows, cols};
    blocks_.push_back(b);
    values_.conservativeResize(b.offset + b.size());
    values_.tail(b.size()).setZero();
    grads_ = VecX<S>::Zero(values_.size());
    return static_cast<int>(blocks_.size()) - 1;
}

namespace {

template <typename S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + S(std::erf(static_cast<double>(x) * M_SQRT1_2)));
}

template <typename S>
S gelu_grad(S x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014327;
    return static_cast<S>(cdf + xd * pdf);
}

// y = xhat * gamma + beta per row, xhat = (x - mean) / sqrt(var + 1e-5)
template <typename S, typename G>
MatX<S> layer_norm(const MatX<S>& x, const G& gamma, const G& beta, MatX<S>& xhat,
                   VecX<S>& inv_sigma) {
    const Eigen::Index n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    inv_sigma.resize(n);
    MatX<S> out(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        const S mu = x.row(r).mean();
        auto centered = (x.row(r).array() - mu).eval();
        const S var = centered.square().sum() / S(d);
        const S inv = S(1) / std::sqrt(var + S(1e-5));
        inv_sigma(r) = inv;
        xhat.row(r) = centered * inv;
        out.row(r) = xhat.row(r).array() * gamma.transpose().array() +
                     beta.transpose().array();
    }
    return out;
}

// reconstructs the post-gain activation from the saved normalized rows
template <typename S, typename G>
MatX<S> ln_output(const MatX<S>& xhat, const G& gamma, const G& beta) {
    MatX<S> out = xhat.array().rowwise() * gamma.transpose().array().row(0);
    out.array().rowwise() += beta.transpose().array().row(0);
    return out;
}

template <typename S>
MatX<S> layer_norm_backward(const MatX<S>& d_out, const MatX<S>& xhat,
                            const VecX<S>& inv_sigma, Eigen::Map<MatX<S>> gamma,
                            Eigen::Map<MatX<S>> d_gamma, Eigen::Map<MatX<S>> d_beta) {
    const Eigen::Index n = d_out.rows(), d = d_out.cols();
    d_gamma.col(0) += (d_out.array() * xhat.array()).colwise().sum().transpose().matrix();
    d_beta.col(0) += d_out.colwise().sum().transpose();
    MatX<S> dx(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        auto dxhat = (d_out.row(r).array() * gamma.col(0).transpose().array()).eval();
        const S m1 = dxhat.mean();
        const S m2 = (dxhat * xhat.row(r).array()).mean();
        dx.row(r) = inv_sigma(r) * (dxhat - m1 - xhat.row(r).array() * m2);
    }
    return dx;
}

template <typename S>
void softmax_rows(MatX<S>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r).array();
        row -= row.maxCoeff();
        row = row.exp();
        row /= row.sum();
    }
}

// d_scores for y = softmax(s): dy ⊙ y - y * <dy, y> per row
template <typename S>
MatX<S> softmax_backward(const MatX<S>& d_attn, const MatX<S>& attn) {
    MatX<S> ds(attn.rows(), attn.cols());
    for (Eigen::Index r = 0; r < attn.rows(); ++r) {
        const S dot = d_attn.row(r).dot(attn.row(r));
        ds.row(r) = attn.row(r).array() * (d_attn.row(r).array() - dot);
    }
    return ds;
}

}  // namespace

template <typename S>
DenoiserT<S>::DenoiserT(const DenoiserConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.dim;
    const int f = cfg_.ffn_mult * d;
    auto linear = [&](const std::string& name, int out, int in) {
        detail::LinearIds ids;
        ids.w = params_.add(name + ".weight", out, in);
        ids.b = params_.add(name + ".bias", out, 1);
        return ids;
    };
    auto norm = [&](const std::string& name) {
        detail::NormIds ids;
        ids.gamma = params_.add(name + ".gamma", d, 1);
        ids.beta = params_.add(name + ".beta", d, 1);
        return ids;
    };
    auto attn_block = [&](const std::string& name) {
        detail::AttnBlockIds ids;
        ids.ln1 = norm(name + ".ln1");
        ids.q = linear(name + ".attn.q", d, d);
        ids.k = linear(name + ".attn.k", d, d);
        ids.v = linear(name + ".attn.v", d, d);
        ids.o = linear(name + ".attn.out", d, d);
        ids.ln2 = norm(name + ".ln2");
        ids.ff1 = linear(name + ".ffn.fc1", f, d);
        ids.ff2 = linear(name + ".ffn.fc2", d, f);
        return ids;
    };

    pose_in_ = linear("pose_in", d, 3);
    for (int i = 0; i < cfg_.p2c_blocks; ++i)
        p2c_.push_back(attn_block("p2c." + std::to_string(i)));
    for (int i = 0; i < cfg_.j2j_blocks; ++i)
        j2j_.push_back(attn_block("j2j." + std::to_string(i)));
    fuse_ = linear("fuse", d, cfg_.channels() * d);
    head_ = linear("head", 3, d);

    init_params(cfg_.init_seed);
}

template <typename S>
void DenoiserT<S>::init_params(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    for (size_t i = 0; i < params_.blocks().size(); ++i) {
        const auto& b = params_.blocks()[i];
        auto m = params_.mat(static_cast<int>(i));
        if (b.name.ends_with(".gamma")) {
            m.setOnes();
        } else if (b.name.ends_with(".bias") || b.name.ends_with(".beta")) {
            m.setZero();
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
            for (Eigen::Index r = 0; r < b.rows; ++r)
                for (Eigen::Index c = 0; c < b.cols; ++c)
                    m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
        }
    }
    params_.zero_grads();
}

namespace {

template <typename S>
MatX<S> apply_linear(const MatX<S>& in, Eigen::Map<const MatX<S>> w,
                     Eigen::Map<const MatX<S>> b) {
    MatX<S> out = in * w.transpose();
    out.rowwise() += b.col(0).transpose();
    return out;
}

template <typename S>
void check_finite(const MatX<S>& m, const char* stage) {
    if (!m.allFinite()) throw NumericalError(stage, "non-finite activation");
}

}  // namespace

template <typename S>
MatX<S> DenoiserT<S>::assemble_batch(const MatX<S>& Y,
                                     const std::vector<const ConditioningFeatures*>& features,
                                     const std::vector<int>& ts,
                                     ConditioningMask mask) const {
    const int B = static_cast<int>(features.size());
    const int J = static_cast<int>(Y.rows()) / B;
    const int c = cfg_.channels();
    const int d = cfg_.dim;
    const int L = cfg_.levels;
    auto row = [&](int b, int ch, int j) { return (b * c + ch) * J + j; };

    check_finite(Y, "input");
    MatX<S> x(static_cast<Eigen::Index>(B) * c * J, d);
    MatX<S> pose_proj = apply_linear(Y, params_.mat(pose_in_.w), params_.mat(pose_in_.b));
    for (int b = 0; b < B; ++b) {
        const auto& F = *features[b];
        F.check_shape();
        if (F.levels != L || F.dim != d || F.joints != J)
            throw ConfigError("denoiser: feature tensor shape does not match the model");
        for (int ch = 0; ch <= L; ++ch) {
            const bool masked = (mask == ConditioningMask::kPoseOnly && ch < L) ||
                                (mask == ConditioningMask::kContextOnly && ch == L);
            for (int j = 0; j < J; ++j) {
                if (masked)
                    x.row(row(b, ch, j)).setZero();
                else
                    x.row(row(b, ch, j)) = F.data.row(F.row(ch, j)).template cast<S>();
            }
        }
        for (int j = 0; j < J; ++j) x.row(row(b, L + 1, j)) = pose_proj.row(b * J + j);
        const VecX<S> ft = embed_timestep<S>(ts[b], d);
        x.middleRows(static_cast<Eigen::Index>(b) * c * J, c * J).rowwise() +=
            ft.transpose();
    }
    check_finite(x, "assemble");
    return x;
}

template <typename S>
MatX<S> DenoiserT<S>::assemble_input(const MatX<S>& y_t, const ConditioningFeatures& F,
                                     int t, ConditioningMask mask) const {
    std::vector<const ConditioningFeatures*> fs{&F};
    return assemble_batch(y_t, fs, {t}, mask);
}

template <typename S>
MatX<S> DenoiserT<S>::forward(const MatX<S>& y_t, const ConditioningFeatures& F, int t,
                              ConditioningMask mask) const {
    std::vector<const ConditioningFeatures*> fs{&F};
    return forward_batch(y_t, fs, {t}, mask, nullptr);
}

template <typename S>
void DenoiserT<S>::run_stage(const std::vector<detail::AttnBlockIds>& ids,
                             bool channel_stage, int batch, int joints, MatX<S>& x,
                             std::vector<typename ForwardTrace<S>::Block>* blocks) const {
    const int c = cfg_.channels();
    const int J = joints;
    const int d = cfg_.dim;
    const int heads = cfg_.heads;
    const int dh = d / heads;
    const bool per_joint = channel_stage && cfg_.channel_tokens == "per_joint";
    const int tokens = channel_stage ? c : J;
    auto row = [&](int b, int ch, int j) { return (b * c + ch) * J + j; };
    // token r-th row for (b, token, position)
    auto trow = [&](int b, int tok, int pos) {
        return channel_stage ? row(b, tok, pos) : row(b, pos, tok);
    };
    const int positions = channel_stage ? J : c;

    for (size_t bi = 0; bi < ids.size(); ++bi) {
        const auto& blk = ids[bi];
        typename ForwardTrace<S>::Block tb;

        MatX<S> xh1 = layer_norm(x, params_.mat(blk.ln1.gamma).col(0),
                                 params_.mat(blk.ln1.beta).col(0), tb.xhat1, tb.inv1);
        tb.q = apply_linear(xh1, params_.mat(blk.q.w), params_.mat(blk.q.b));
        tb.k = apply_linear(xh1, params_.mat(blk.k.w), params_.mat(blk.k.b));
        tb.v = apply_linear(xh1, params_.mat(blk.v.w), params_.mat(blk.v.b));

        tb.attn_cat = MatX<S>::Zero(x.rows(), d);
        const int score_positions = per_joint ? 1 : positions;
        const S inv_scale = S(1) / std::sqrt(static_cast<S>(score_positions == 1
                                                                ? dh
                                                                : positions * dh));
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                const int hs = h * dh;
                const int groups = per_joint ? positions : 1;
                for (int g = 0; g < groups; ++g) {
                    MatX<S> scores = MatX<S>::Zero(tokens, tokens);
                    for (int a = 0; a < tokens; ++a)
                        for (int a2 = 0; a2 < tokens; ++a2) {
                            S s = 0;
                            if (per_joint) {
                                s = tb.q.row(trow(b, a, g))
                                        .segment(hs, dh)
                                        .dot(tb.k.row(trow(b, a2, g)).segment(hs, dh));
                            } else {
                                for (int p = 0; p < positions; ++p)
                                    s += tb.q.row(trow(b, a, p))
                                             .segment(hs, dh)
                                             .dot(tb.k.row(trow(b, a2, p)).segment(hs, dh));
                            }
                            scores(a, a2) = s * inv_scale;
                        }
                    softmax_rows(scores);
                    for (int a = 0; a < tokens; ++a)
                        for (int a2 = 0; a2 < tokens; ++a2) {
                            const S w = scores(a, a2);
                            if (per_joint) {
                                tb.attn_cat.row(trow(b, a, g)).segment(hs, dh) +=
                                    w * tb.v.row(trow(b, a2, g)).segment(hs, dh);
                            } else {
                                for (int p = 0; p < positions; ++p)
                                    tb.attn_cat.row(trow(b, a, p)).segment(hs, dh) +=
                                        w * tb.v.row(trow(b, a2, p)).segment(hs, dh);
                            }
                        }
                    tb.attn.push_back(std::move(scores));
                }
            }
        }

        x += apply_linear(tb.attn_cat, params_.mat(blk.o.w), params_.mat(blk.o.b));
        MatX<S> xh2 = layer_norm(x, params_.mat(blk.ln2.gamma).col(0),
                                 params_.mat(blk.ln2.beta).col(0), tb.xhat2, tb.inv2);
        tb.ff_pre = apply_linear(xh2, params_.mat(blk.ff1.w), params_.mat(blk.ff1.b));
        tb.ff_act = tb.ff_pre.unaryExpr([](S v) { return gelu(v); });
        x += apply_linear(tb.ff_act, params_.mat(blk.ff2.w), params_.mat(blk.ff2.b));
        check_finite(x, channel_stage ? "p2c_block" : "j2j_block");

        if (blocks) blocks->push_back(std::move(tb));
    }
}

template <typename S>
MatX<S> DenoiserT<S>::forward_batch(const MatX<S>& Y,
                                    const std::vector<const ConditioningFeatures*>& features,
                                    const std::vector<int>& ts, ConditioningMask mask,
                                    ForwardTrace<S>* trace) const {
    const int B = static_cast<int>(features.size());
    if (B == 0) throw ConfigError("denoiser: empty batch");
    if (static_cast<int>(ts.size()) != B || Y.rows() % B != 0)
        throw ConfigError("denoiser: batch sizes disagree");
    const int J = static_cast<int>(Y.rows()) / B;
    const int c = cfg_.channels();
    const int d = cfg_.dim;
    auto row = [&](int b, int ch, int j) { return (b * c + ch) * J + j; };

    MatX<S> x = assemble_batch(Y, features, ts, mask);
    if (trace) {
        trace->batch = B;
        trace->joints = J;
        trace->mask = mask;
        trace->y_in = Y;
        trace->x0 = x;
        trace->p2c.clear();
        trace->j2j.clear();
        trace->p2c.reserve(p2c_.size());
        trace->j2j.reserve(j2j_.size());
    }

    run_stage(p2c_, true, B, J, x, trace ? &trace->p2c : nullptr);
    run_stage(j2j_, false, B, J, x, trace ? &trace->j2j : nullptr);

    MatX<S> fuse_in(B * J, c * d);
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < J; ++j)
            for (int ch = 0; ch < c; ++ch)
                fuse_in.row(b * J + j).segment(ch * d, d) = x.row(row(b, ch, j));
    MatX<S> fuse_out = apply_linear(fuse_in, params_.mat(fuse_.w), params_.mat(fuse_.b));
    check_finite(fuse_out, "fuse");
    MatX<S> eps = apply_linear(fuse_out, params_.mat(head_.w), params_.mat(head_.b));
    check_finite(eps, "head");

    if (trace) {
        trace->fuse_in = std::move(fuse_in);
        trace->fuse_out = std::move(fuse_out);
    }
    return eps;
}

template <typename S>
void DenoiserT<S>::backward_stage(const std::vector<detail::AttnBlockIds>& ids,
                                  bool channel_stage, int batch, int joints,
                                  const std::vector<typename ForwardTrace<S>::Block>& blocks,
                                  MatX<S>& dx) {
    const int c = cfg_.channels();
    const int J = joints;
    const int d = cfg_.dim;
    const int heads = cfg_.heads;
    const int dh = d / heads;
    const bool per_joint = channel_stage && cfg_.channel_tokens == "per_joint";
    const int tokens = channel_stage ? c : J;
    auto row = [&](int b, int ch, int j) { return (b * c + ch) * J + j; };
    auto trow = [&](int b, int tok, int pos) {
        return channel_stage ? row(b, tok, pos) : row(b, pos, tok);
    };
    const int positions = channel_stage ? J : c;
    const S inv_scale =
        S(1) / std::sqrt(static_cast<S>(per_joint ? dh : positions * dh));

    for (int bi = static_cast<int>(ids.size()) - 1; bi >= 0; --bi) {
        const auto& blk = ids[bi];
        const auto& tb = blocks[bi];

        // x_out = x_mid + ffn(ln2(x_mid))
        MatX<S> d_ffn_out = dx;
        params_.grad(blk.ff2.w) += d_ffn_out.transpose() * tb.ff_act;
        params_.grad(blk.ff2.b).col(0) += d_ffn_out.colwise().sum().transpose();
        MatX<S> d_ff_act = d_ffn_out * params_.mat(blk.ff2.w);
        MatX<S> d_ff_pre =
            d_ff_act.array() * tb.ff_pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
        MatX<S> xh2 = ln_output(tb.xhat2, params_.mat(blk.ln2.gamma).col(0),
                                params_.mat(blk.ln2.beta).col(0));
        params_.grad(blk.ff1.w) += d_ff_pre.transpose() * xh2;
        params_.grad(blk.ff1.b).col(0) += d_ff_pre.colwise().sum().transpose();
        MatX<S> d_xh2 = d_ff_pre * params_.mat(blk.ff1.w);
        dx += layer_norm_backward(d_xh2, tb.xhat2, tb.inv2, params_.mat(blk.ln2.gamma),
                                  params_.grad(blk.ln2.gamma), params_.grad(blk.ln2.beta));

        // x_mid = x_in + o(attention(ln1(x_in)))
        MatX<S> d_oproj = dx;
        params_.grad(blk.o.w) += d_oproj.transpose() * tb.attn_cat;
        params_.grad(blk.o.b).col(0) += d_oproj.colwise().sum().transpose();
        MatX<S> d_attn_cat = d_oproj * params_.mat(blk.o.w);

        MatX<S> dq = MatX<S>::Zero(dx.rows(), d);
        MatX<S> dk = MatX<S>::Zero(dx.rows(), d);
        MatX<S> dv = MatX<S>::Zero(dx.rows(), d);
        int attn_idx = 0;
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                const int hs = h * dh;
                const int groups = per_joint ? positions : 1;
                for (int g = 0; g < groups; ++g) {
                    const MatX<S>& attn = tb.attn[attn_idx++];
                    MatX<S> d_attn = MatX<S>::Zero(tokens, tokens);
                    for (int a = 0; a < tokens; ++a)
                        for (int a2 = 0; a2 < tokens; ++a2) {
                            S s = 0;
                            const S w = attn(a, a2);
                            if (per_joint) {
                                auto dseg = d_attn_cat.row(trow(b, a, g)).segment(hs, dh);
                                s = dseg.dot(tb.v.row(trow(b, a2, g)).segment(hs, dh));
                                dv.row(trow(b, a2, g)).segment(hs, dh) += w * dseg;
                            } else {
                                for (int p = 0; p < positions; ++p) {
                                    auto dseg = d_attn_cat.row(trow(b, a, p)).segment(hs, dh);
                                    s += dseg.dot(tb.v.row(trow(b, a2, p)).segment(hs, dh));
                                    dv.row(trow(b, a2, p)).segment(hs, dh) += w * dseg;
                                }
                            }
                            d_attn(a, a2) = s;
                        }
                    MatX<S> d_scores = softmax_backward(d_attn, attn);
                    for (int a = 0; a < tokens; ++a)
                        for (int a2 = 0; a2 < tokens; ++a2) {
                            const S ds = d_scores(a, a2) * inv_scale;
                            if (per_joint) {
                                dq.row(trow(b, a, g)).segment(hs, dh) +=
                                    ds * tb.k.row(trow(b, a2, g)).segment(hs, dh);
                                dk.row(trow(b, a2, g)).segment(hs, dh) +=
                                    ds * tb.q.row(trow(b, a, g)).segment(hs, dh);
                            } else {
                                for (int p = 0; p < positions; ++p) {
                                    dq.row(trow(b, a, p)).segment(hs, dh) +=
                                        ds * tb.k.row(trow(b, a2, p)).segment(hs, dh);
                                    dk.row(trow(b, a2, p)).segment(hs, dh) +=
                                        ds * tb.q.row(trow(b, a, p)).segment(hs, dh);
                                }
                            }
                        }
                }
            }
        }

        MatX<S> xh1 = ln_output(tb.xhat1, params_.mat(blk.ln1.gamma).col(0),
                                params_.mat(blk.ln1.beta).col(0));
        params_.grad(blk.q.w) += dq.transpose() * xh1;
        params_.grad(blk.q.b).col(0) += dq.colwise().sum().transpose();
        params_.grad(blk.k.w) += dk.transpose() * xh1;
        params_.grad(blk.k.b).col(0) += dk.colwise().sum().transpose();
        params_.grad(blk.v.w) += dv.transpose() * xh1;
        params_.grad(blk.v.b).col(0) += dv.colwise().sum().transpose();
        MatX<S> d_xh1 = dq * params_.mat(blk.q.w);
        d_xh1.noalias() += dk * params_.mat(blk.k.w);
        d_xh1.noalias() += dv * params_.mat(blk.v.w);
        dx += layer_norm_backward(d_xh1, tb.xhat1, tb.inv1, params_.mat(blk.ln1.gamma),
                                  params_.grad(blk.ln1.gamma), params_.grad(blk.ln1.beta));
    }
}

template <typename S>
void DenoiserT<S>::backward(const ForwardTrace<S>& trace, const MatX<S>& d_eps,
                            MatX<S>* d_y, std::vector<MatX<S>>* d_features) {
    const int B = trace.batch;
    const int J = trace.joints;
    const int c = cfg_.channels();
    const int d = cfg_.dim;
    const int L = cfg_.levels;
    auto row = [&](int b, int ch, int j) { return (b * c + ch) * J + j; };

    params_.grad(head_.w) += d_eps.transpose() * trace.fuse_out;
    params_.grad(head_.b).col(0) += d_eps.colwise().sum().transpose();
    MatX<S> d_fuse_out = d_eps * params_.mat(head_.w);
    params_.grad(fuse_.w) += d_fuse_out.transpose() * trace.fuse_in;
    params_.grad(fuse_.b).col(0) += d_fuse_out.colwise().sum().transpose();
    MatX<S> d_fuse_in = d_fuse_out * params_.mat(fuse_.w);

    MatX<S> dx(B * c * J, d);
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < J; ++j)
            for (int ch = 0; ch < c; ++ch)
                dx.row(row(b, ch, j)) = d_fuse_in.row(b * J + j).segment(ch * d, d);

    backward_stage(j2j_, false, B, J, trace.j2j, dx);
    backward_stage(p2c_, true, B, J, trace.p2c, dx);

    // assembly: channels 0..L feed from F (zero where masked), channel L+1
    // from the pose projection; the timestep embedding is parameter-free
    MatX<S> d_pose_proj(B * J, d);
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < J; ++j)
            d_pose_proj.row(b * J + j) = dx.row(row(b, L + 1, j));
    params_.grad(pose_in_.w) += d_pose_proj.transpose() * trace.y_in;
    params_.grad(pose_in_.b).col(0) += d_pose_proj.colwise().sum().transpose();
    if (d_y) *d_y = d_pose_proj * params_.mat(pose_in_.w);

    if (d_features) {
        d_features->assign(B, MatX<S>());
        for (int b = 0; b < B; ++b) {
            MatX<S>& df = (*d_features)[b];
            df.resize((L + 1) * J, d);
            for (int ch = 0; ch <= L; ++ch) {
                // masked channels never reach the network, so F has no gradient there
                const bool masked =
                    (trace.mask == ConditioningMask::kPoseOnly && ch < L) ||
                    (trace.mask == ConditioningMask::kContextOnly && ch == L);
                for (int j = 0; j < J; ++j) {
                    if (masked)
                        df.row(ch * J + j).setZero();
                    else
                        df.row(ch * J + j) = dx.row(row(b, ch, j));
                }
            }
        }
    }
}

template class ParamStore<float>;
template class ParamStore<double>;
template class DenoiserT<float>;
template class DenoiserT<double>;
template VecX<float> embed_timestep<float>(int, int);
template VecX<double> embed_timestep<double>(int, int);

}  // namespace liftkit
