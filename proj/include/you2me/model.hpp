#pragma once

#include <random>
#include <string>
#include <vector>

#include "you2me/common.hpp"

namespace you2me {

enum class Head { Classification, Regression };
enum class RunMode { Train, Eval };
enum class DecodeMode { TeacherForced, Autoregressive };

struct ModelConfig {
    int embed_dim = 256;         // E
    int hidden_dim = 512;        // D
    int num_layers = 2;
    int num_classes = 0;         // K: class count and previous-pose vocabulary
    int scene_dim = 2048;
    int motion_dim = 135;
    int second_person_dim = 50;  // adjustable for 3D second-person channels
    Head head = Head::Classification;
    int regression_output_dim = 0;
    // Ablation switches: a disabled feature enters as a zero vector of the
    // same dimension, so input_dim is unchanged.
    bool use_scene = true;
    bool use_second_person = true;

    int input_dim() const { return motion_dim + second_person_dim + 2 * embed_dim; }
    int output_dim() const {
        return head == Head::Classification ? num_classes : regression_output_dim;
    }
    void validate() const {
        if (embed_dim < 1 || hidden_dim < 1 || num_layers < 1 || num_classes < 1 ||
            scene_dim < 1 || motion_dim < 1 || second_person_dim < 1)
            throw ConfigMismatch("model dimensions must be positive");
        if (head == Head::Regression && regression_output_dim < 1)
            throw ConfigMismatch("regression head needs regression_output_dim");
    }
    bool operator==(const ModelConfig&) const = default;
};

template <class S>
struct LstmLayerParams {
    // Gate rows stacked [input; forget; candidate; output], 4D x in and 4D x D.
    ColMatX<S> w_in;
    ColMatX<S> w_rec;
    VecX<S> bias;
};

template <class S>
struct TensorRef {
    std::string name;
    S* data;
    Eigen::Index size;
};

template <class S>
struct ModelParams {
    ModelConfig config;
    ColMatX<S> w_scene;  // E x scene_dim
    ColMatX<S> w_pose;   // E x K, column k is the embedding of pose id k
    ColMatX<S> w_out;    // out x D
    std::vector<LstmLayerParams<S>> lstm;
    VecX<S> bn_gamma, bn_beta;
    VecX<S> bn_mean, bn_var;  // running statistics, not gradient-trained
    int initial_pose_id = 0;  // pose fed at t=0

    static ModelParams zeros(const ModelConfig& cfg);
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

    std::vector<TensorRef<S>> tensors();
    void set_zero();

    template <class T>
    ModelParams<T> cast() const;
};

template <class S>
struct LstmState {
    // One {h, c} pair per layer, each hidden_dim x batch.
    std::vector<ColMatX<S>> h, c;

    static LstmState zeros(const ModelConfig& cfg, Eigen::Index batch) {
        LstmState st;
        st.h.assign(cfg.num_layers, ColMatX<S>::Zero(cfg.hidden_dim, batch));
        st.c.assign(cfg.num_layers, ColMatX<S>::Zero(cfg.hidden_dim, batch));
        return st;
    }
};

template <class S>
struct StepInput {
    VecX<S> motion;         // 135
    VecX<S> second_person;  // o_dim
    VecX<S> scene;          // 2048
    int prev_pose_id = 0;   // teacher-forced previous pose
};

// One training window with per-frame channels as columns.
template <class S>
struct WindowData {
    ColMatX<S> motion;         // motion_dim x T
    ColMatX<S> second_person;  // o_dim x T
    ColMatX<S> scene;          // scene_dim x T
    std::vector<int> prev_ids;     // T, teacher-forced inputs
    std::vector<int> targets;      // T, classification targets
    ColMatX<S> reg_targets;        // out x T, regression targets

    Eigen::Index length() const { return motion.cols(); }
};

// ---- single-step operations ----

// x = BN(W_x s). Train mode runs batch statistics over the columns and
// updates the running estimates; eval mode applies the running statistics.
template <class S>
ColMatX<S> embed_scene_batch(const ColMatX<S>& scene, ModelParams<S>& params, RunMode mode,
                             bool update_running = true);

template <class S>
VecX<S> embed_scene(const VecX<S>& scene, ModelParams<S>& params, RunMode mode = RunMode::Eval);

template <class S>
VecX<S> embed_prev_pose(int prev_pose_id, const ModelParams<S>& params);

template <class S>
LstmState<S> lstm_step(const VecX<S>& input, const LstmState<S>& state,
                       const ModelParams<S>& params);

// ---- sequence operations ----

struct SequenceOutput {
    MatX<double> logits;          // N x out (regression: predictions)
    std::vector<int> predicted;   // argmax ids (regression: quantized feedback ids)
};

// Runs the full model over one sequence. Autoregressive mode feeds the argmax
// of the previous frame; t=0 always uses params.initial_pose_id. BN runs in
// eval mode (batch of one).
template <class S>
SequenceOutput forward_sequence(const std::vector<StepInput<S>>& seq, ModelParams<S>& params,
                                DecodeMode mode);

// Regression decode; `quantize_pred` maps a predicted coordinate vector to the
// pose id fed back through the pose embedding.
template <class S, class QuantizeFn>
SequenceOutput forward_sequence_regression(const std::vector<StepInput<S>>& seq,
                                           ModelParams<S>& params, DecodeMode mode,
                                           QuantizeFn&& quantize_pred);

// Summed cross entropy: L = -sum_t log softmax(logits_t)[target_t].
double sequence_loss(const MatX<double>& logits, const std::vector<int>& targets);

struct BatchStats {
    double loss = 0.0;
    long frames = 0;
    long correct = 0;  // teacher-forced argmax hits (classification)
};

// Teacher-forced forward (and backward when grads != nullptr) over a batch of
// windows, with per-timestep batch normalization statistics. When `normalize`
// the loss and gradients are divided by the total frame count (regression:
// frames times output dim).
template <class S>
BatchStats forward_backward(const std::vector<WindowData<S>>& windows, ModelParams<S>& params,
                            ModelParams<S>* grads, bool normalize = true,
                            bool update_running = true);

// Spec-level wrapper: exact gradients of the summed sequence loss for one
// teacher-forced sequence.
template <class S>
ModelParams<S> backward(const WindowData<S>& window, ModelParams<S>& params);

// ---- optimizer ----

template <class S>
struct AdamState {
    std::vector<VecX<S>> m, v;
    long step = 0;

    static AdamState init(ModelParams<S>& params) {
        AdamState st;
        for (auto& t : params.tensors()) {
            st.m.push_back(VecX<S>::Zero(t.size));
            st.v.push_back(VecX<S>::Zero(t.size));
        }
        return st;
    }
};

template <class S>
double global_grad_norm(ModelParams<S>& grads);

// Clips the gradient to `clip_norm` (0 disables) and applies one Adam update.
template <class S>
void adam_step(ModelParams<S>& params, ModelParams<S>& grads, AdamState<S>& state, double lr,
               double clip_norm = 5.0, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// ---- gradient checking ----

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::vector<std::pair<std::string, double>> per_tensor;
};

// Central finite differences (step 1e-5, double) against the analytic
// gradients on random windows drawn from `seed`.
GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed);

// =====================  implementation  =====================

namespace detail {

template <class S>
inline S bn_eps() {
    return static_cast<S>(1e-5);
}
inline constexpr double kBnMomentum = 0.1;

template <class S>
inline ColMatX<S> sigmoid(const ColMatX<S>& x) {
    return ((-x.array()).exp() + S(1)).inverse().matrix();
}

template <class Rng>
inline void fill_uniform(Eigen::Ref<ColMatX<double>> m, double lo, double hi, Rng& rng) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            m(r, c) = lo + (hi - lo) * next_unit(rng);
}

}  // namespace detail

template <class S>
ModelParams<S> ModelParams<S>::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    p.w_scene = ColMatX<S>::Zero(cfg.embed_dim, cfg.scene_dim);
    p.w_pose = ColMatX<S>::Zero(cfg.embed_dim, cfg.num_classes);
    p.w_out = ColMatX<S>::Zero(cfg.output_dim(), cfg.hidden_dim);
    for (int l = 0; l < cfg.num_layers; ++l) {
        const int in = l == 0 ? cfg.input_dim() : cfg.hidden_dim;
        p.lstm.push_back({ColMatX<S>::Zero(4 * cfg.hidden_dim, in),
                          ColMatX<S>::Zero(4 * cfg.hidden_dim, cfg.hidden_dim),
                          VecX<S>::Zero(4 * cfg.hidden_dim)});
    }
    p.bn_gamma = VecX<S>::Ones(cfg.embed_dim);
    p.bn_beta = VecX<S>::Zero(cfg.embed_dim);
    p.bn_mean = VecX<S>::Zero(cfg.embed_dim);
    p.bn_var = VecX<S>::Ones(cfg.embed_dim);
    return p;
}

template <class S>
ModelParams<S> ModelParams<S>::init(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = zeros(cfg);
    std::mt19937_64 rng(seed);
    auto uniform_fan_in = [&rng](ColMatX<S>& m, Eigen::Index fan_in) {
        const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
        ColMatX<double> tmp(m.rows(), m.cols());
        detail::fill_uniform(tmp, -b, b, rng);
        m = tmp.template cast<S>();
    };
    uniform_fan_in(p.w_scene, cfg.scene_dim);
    uniform_fan_in(p.w_pose, cfg.num_classes);
    uniform_fan_in(p.w_out, cfg.hidden_dim);
    for (int l = 0; l < cfg.num_layers; ++l) {
        uniform_fan_in(p.lstm[l].w_in, p.lstm[l].w_in.cols());
        uniform_fan_in(p.lstm[l].w_rec, cfg.hidden_dim);
        // Forget-gate bias starts at 1 so early cells retain memory.
        p.lstm[l].bias.segment(cfg.hidden_dim, cfg.hidden_dim).setConstant(S(1));
    }
    return p;
}

template <class S>
std::vector<TensorRef<S>> ModelParams<S>::tensors() {
    std::vector<TensorRef<S>> t;
    t.push_back({"w_scene", w_scene.data(), w_scene.size()});
    t.push_back({"w_pose", w_pose.data(), w_pose.size()});
    t.push_back({"w_out", w_out.data(), w_out.size()});
    for (std::size_t l = 0; l < lstm.size(); ++l) {
        const std::string p = "lstm" + std::to_string(l) + ".";
        t.push_back({p + "w_in", lstm[l].w_in.data(), lstm[l].w_in.size()});
        t.push_back({p + "w_rec", lstm[l].w_rec.data(), lstm[l].w_rec.size()});
        t.push_back({p + "bias", lstm[l].bias.data(), lstm[l].bias.size()});
    }
    t.push_back({"bn_gamma", bn_gamma.data(), bn_gamma.size()});
    t.push_back({"bn_beta", bn_beta.data(), bn_beta.size()});
    return t;
}

template <class S>
void ModelParams<S>::set_zero() {
    for (auto& t : tensors()) Eigen::Map<VecX<S>>(t.data, t.size).setZero();
}

template <class S>
template <class T>
ModelParams<T> ModelParams<S>::cast() const {
    ModelParams<T> out = ModelParams<T>::zeros(config);
    out.w_scene = w_scene.template cast<T>();
    out.w_pose = w_pose.template cast<T>();
    out.w_out = w_out.template cast<T>();
    for (std::size_t l = 0; l < lstm.size(); ++l) {
        out.lstm[l].w_in = lstm[l].w_in.template cast<T>();
        out.lstm[l].w_rec = lstm[l].w_rec.template cast<T>();
        out.lstm[l].bias = lstm[l].bias.template cast<T>();
    }
    out.bn_gamma = bn_gamma.template cast<T>();
    out.bn_beta = bn_beta.template cast<T>();
    out.bn_mean = bn_mean.template cast<T>();
    out.bn_var = bn_var.template cast<T>();
    out.initial_pose_id = initial_pose_id;
    return out;
}

template <class S>
ColMatX<S> embed_scene_batch(const ColMatX<S>& scene, ModelParams<S>& params, RunMode mode,
                             bool update_running) {
    if (scene.rows() != params.config.scene_dim)
        throw ShapeMismatch("scene feature rows != scene_dim");
    const ColMatX<S> pre = params.w_scene * scene;
    const auto b = static_cast<S>(scene.cols());
    if (mode == RunMode::Train) {
        const VecX<S> mu = pre.rowwise().mean();
        const VecX<S> var =
            (pre.colwise() - mu).array().square().matrix().rowwise().sum() / b;
        const VecX<S> inv_std = (var.array() + detail::bn_eps<S>()).rsqrt();
        ColMatX<S> xhat = (pre.colwise() - mu).array().colwise() * inv_std.array();
        if (update_running) {
            const S m = static_cast<S>(detail::kBnMomentum);
            params.bn_mean = (S(1) - m) * params.bn_mean + m * mu;
            params.bn_var = (S(1) - m) * params.bn_var + m * var;
        }
        return ((xhat.array().colwise() * params.bn_gamma.array()).colwise() +
                params.bn_beta.array())
            .matrix();
    }
    const VecX<S> inv_std = (params.bn_var.array() + detail::bn_eps<S>()).rsqrt();
    ColMatX<S> xhat = (pre.colwise() - params.bn_mean).array().colwise() * inv_std.array();
    return ((xhat.array().colwise() * params.bn_gamma.array()).colwise() +
            params.bn_beta.array())
        .matrix();
}

template <class S>
VecX<S> embed_scene(const VecX<S>& scene, ModelParams<S>& params, RunMode mode) {
    return embed_scene_batch<S>(scene, params, mode);
}

template <class S>
VecX<S> embed_prev_pose(int prev_pose_id, const ModelParams<S>& params) {
    if (prev_pose_id < 0 || prev_pose_id >= params.config.num_classes)
        throw IndexOutOfRange("previous pose id outside [0, K)");
    return params.w_pose.col(prev_pose_id);
}

namespace detail {

// One batched LSTM stack step; writes the gate activations into `cache` when
// given (layout per layer: i, f, g, o, tanh_c each D x B).
template <class S>
struct LayerCache {
    ColMatX<S> gi, gf, gg, go, tanh_c, input;
};

template <class S>
void lstm_stack_step(const ColMatX<S>& input, LstmState<S>& state, const ModelParams<S>& params,
                     std::vector<LayerCache<S>>* cache) {
    const int d = params.config.hidden_dim;
    ColMatX<S> x = input;
    for (int l = 0; l < params.config.num_layers; ++l) {
        const auto& lp = params.lstm[l];
        ColMatX<S> pre = (lp.w_in * x + lp.w_rec * state.h[l]).colwise() + lp.bias;
        ColMatX<S> gi = sigmoid<S>(pre.topRows(d));
        ColMatX<S> gf = sigmoid<S>(pre.middleRows(d, d));
        ColMatX<S> gg = pre.middleRows(2 * d, d).array().tanh().matrix();
        ColMatX<S> go = sigmoid<S>(pre.bottomRows(d));
        state.c[l] = gf.cwiseProduct(state.c[l]) + gi.cwiseProduct(gg);
        ColMatX<S> tc = state.c[l].array().tanh().matrix();
        state.h[l] = go.cwiseProduct(tc);
        if (cache) (*cache)[l] = {gi, gf, gg, go, tc, x};
        x = state.h[l];
    }
}

}  // namespace detail

template <class S>
LstmState<S> lstm_step(const VecX<S>& input, const LstmState<S>& state,
                       const ModelParams<S>& params) {
    if (input.size() != params.config.input_dim())
        throw ShapeMismatch("lstm input size != input_dim");
    LstmState<S> next = state;
    detail::lstm_stack_step<S>(input, next, params, nullptr);
    return next;
}

namespace detail {

template <class S>
ColMatX<S> assemble_input(const VecX<S>& m, const VecX<S>& o, const VecX<S>& x,
                          const VecX<S>& z) {
    ColMatX<S> b(m.size() + o.size() + x.size() + z.size(), 1);
    b << m, o, x, z;
    return b;
}

}  // namespace detail

template <class S>
SequenceOutput forward_sequence(const std::vector<StepInput<S>>& seq, ModelParams<S>& params,
                                DecodeMode mode) {
    if (seq.empty()) throw EmptySequence("forward_sequence on empty sequence");
    const auto& cfg = params.config;
    const auto n = static_cast<Eigen::Index>(seq.size());
    SequenceOutput out;
    out.logits.resize(n, cfg.output_dim());
    out.predicted.resize(n);
    LstmState<S> state = LstmState<S>::zeros(cfg, 1);
    int prev = params.initial_pose_id;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (mode == DecodeMode::TeacherForced && t > 0) prev = seq[t].prev_pose_id;
        const VecX<S> x = cfg.use_scene
                              ? embed_scene<S>(seq[t].scene, params, RunMode::Eval)
                              : VecX<S>::Zero(cfg.embed_dim).eval();
        const VecX<S> o = cfg.use_second_person
                              ? seq[t].second_person
                              : VecX<S>::Zero(cfg.second_person_dim).eval();
        const VecX<S> z = embed_prev_pose<S>(prev, params);
        ColMatX<S> b = detail::assemble_input<S>(seq[t].motion, o, x, z);
        detail::lstm_stack_step<S>(b, state, params, nullptr);
        const VecX<S> logits = params.w_out * state.h[cfg.num_layers - 1].col(0);
        out.logits.row(t) = logits.template cast<double>();
        Eigen::Index best;
        logits.maxCoeff(&best);
        out.predicted[t] = static_cast<int>(best);
        if (mode == DecodeMode::Autoregressive) prev = out.predicted[t];
    }
    return out;
}

template <class S, class QuantizeFn>
SequenceOutput forward_sequence_regression(const std::vector<StepInput<S>>& seq,
                                           ModelParams<S>& params, DecodeMode mode,
                                           QuantizeFn&& quantize_pred) {
    if (seq.empty()) throw EmptySequence("forward_sequence on empty sequence");
    const auto& cfg = params.config;
    if (cfg.head != Head::Regression) throw ConfigMismatch("regression head not configured");
    const auto n = static_cast<Eigen::Index>(seq.size());
    SequenceOutput out;
    out.logits.resize(n, cfg.output_dim());
    out.predicted.resize(n);
    LstmState<S> state = LstmState<S>::zeros(cfg, 1);
    int prev = params.initial_pose_id;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (mode == DecodeMode::TeacherForced && t > 0) prev = seq[t].prev_pose_id;
        const VecX<S> x = cfg.use_scene
                              ? embed_scene<S>(seq[t].scene, params, RunMode::Eval)
                              : VecX<S>::Zero(cfg.embed_dim).eval();
        const VecX<S> o = cfg.use_second_person
                              ? seq[t].second_person
                              : VecX<S>::Zero(cfg.second_person_dim).eval();
        const VecX<S> z = embed_prev_pose<S>(prev, params);
        ColMatX<S> b = detail::assemble_input<S>(seq[t].motion, o, x, z);
        detail::lstm_stack_step<S>(b, state, params, nullptr);
        const VecX<S> pred = params.w_out * state.h[cfg.num_layers - 1].col(0);
        out.logits.row(t) = pred.template cast<double>();
        out.predicted[t] = quantize_pred(pred.template cast<double>().eval());
        if (mode == DecodeMode::Autoregressive) prev = out.predicted[t];
    }
    return out;
}

inline double sequence_loss(const MatX<double>& logits, const std::vector<int>& targets) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size())
        throw ShapeMismatch("one target per frame required");
    double loss = 0.0;
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        if (targets[t] < 0 || targets[t] >= logits.cols())
            throw IndexOutOfRange("target id outside [0, K)");
        const Eigen::VectorXd row = logits.row(t);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        loss += lse - row(targets[t]);
    }
    return loss;
}

template <class S>
BatchStats forward_backward(const std::vector<WindowData<S>>& windows, ModelParams<S>& params,
                            ModelParams<S>* grads, bool normalize, bool update_running) {
    if (windows.empty()) throw EmptySequence("empty batch");
    const auto& cfg = params.config;
    const int d = cfg.hidden_dim;
    const int e = cfg.embed_dim;
    const bool classify = cfg.head == Head::Classification;

    // Process windows longest-first so the active set at any timestep is a
    // prefix of the batch.
    std::vector<int> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return windows[a].length() > windows[b].length();
    });

    Eigen::Index t_max = 0;
    long total_frames = 0;
    for (const auto& w : windows) {
        if (w.motion.rows() != cfg.motion_dim || w.second_person.rows() != cfg.second_person_dim ||
            w.scene.rows() != cfg.scene_dim)
            throw ShapeMismatch("window channel dimensions do not match config");
        const Eigen::Index len = w.length();
        if (len == 0) throw EmptySequence("zero-length window");
        if (w.second_person.cols() != len || w.scene.cols() != len ||
            static_cast<Eigen::Index>(w.prev_ids.size()) != len)
            throw MisalignedSequence("window channels disagree on length");
        if (classify && static_cast<Eigen::Index>(w.targets.size()) != len)
            throw MisalignedSequence("targets length mismatch");
        if (!classify && w.reg_targets.cols() != len)
            throw MisalignedSequence("regression targets length mismatch");
        t_max = std::max(t_max, len);
        total_frames += len;
    }
    const double denom =
        normalize ? static_cast<double>(total_frames) * (classify ? 1.0 : cfg.output_dim())
                  : 1.0;

    struct StepCache {
        Eigen::Index batch;
        ColMatX<S> scene, xhat, dlogits, h_top;
        VecX<S> inv_std;
        std::vector<int> ids;
        std::vector<detail::LayerCache<S>> layers;
        std::vector<ColMatX<S>> h_prev, c_prev;
    };
    std::vector<StepCache> cache;
    if (grads) cache.resize(t_max);

    LstmState<S> state = LstmState<S>::zeros(cfg, static_cast<Eigen::Index>(windows.size()));
    BatchStats stats;
    stats.frames = total_frames;

    for (Eigen::Index t = 0; t < t_max; ++t) {
        Eigen::Index batch = 0;
        while (batch < static_cast<Eigen::Index>(order.size()) &&
               windows[order[batch]].length() > t)
            ++batch;

        ColMatX<S> scene(cfg.scene_dim, batch);
        ColMatX<S> b(cfg.input_dim(), batch);
        std::vector<int> ids(batch);
        for (Eigen::Index j = 0; j < batch; ++j) {
            const auto& w = windows[order[j]];
            scene.col(j) = w.scene.col(t);
            b.col(j).head(cfg.motion_dim) = w.motion.col(t);
            b.col(j).segment(cfg.motion_dim, cfg.second_person_dim) =
                cfg.use_second_person ? w.second_person.col(t)
                                      : VecX<S>::Zero(cfg.second_person_dim).eval();
            ids[j] = t == 0 ? params.initial_pose_id : w.prev_ids[t];
            if (ids[j] < 0 || ids[j] >= cfg.num_classes)
                throw IndexOutOfRange("previous pose id outside [0, K)");
        }

        // Scene embedding with per-timestep batch normalization.
        ColMatX<S> xhat;
        VecX<S> inv_std;
        if (cfg.use_scene) {
            const ColMatX<S> pre = params.w_scene * scene;
            const auto bs = static_cast<S>(batch);
            const VecX<S> mu = pre.rowwise().mean();
            const VecX<S> var =
                (pre.colwise() - mu).array().square().matrix().rowwise().sum() / bs;
            inv_std = (var.array() + detail::bn_eps<S>()).rsqrt();
            xhat = (pre.colwise() - mu).array().colwise() * inv_std.array();
            if (update_running) {
                const S mom = static_cast<S>(detail::kBnMomentum);
                params.bn_mean = (S(1) - mom) * params.bn_mean + mom * mu;
                params.bn_var = (S(1) - mom) * params.bn_var + mom * var;
            }
            b.middleRows(cfg.motion_dim + cfg.second_person_dim, e) =
                ((xhat.array().colwise() * params.bn_gamma.array()).colwise() +
                 params.bn_beta.array())
                    .matrix();
        } else {
            b.middleRows(cfg.motion_dim + cfg.second_person_dim, e).setZero();
        }
        for (Eigen::Index j = 0; j < batch; ++j)
            b.col(j).tail(e) = params.w_pose.col(ids[j]);

        std::vector<detail::LayerCache<S>> layer_cache(cfg.num_layers);
        std::vector<ColMatX<S>> h_prev, c_prev;
        if (grads) {
            h_prev.reserve(cfg.num_layers);
            c_prev.reserve(cfg.num_layers);
            for (int l = 0; l < cfg.num_layers; ++l) {
                h_prev.push_back(state.h[l].leftCols(batch));
                c_prev.push_back(state.c[l].leftCols(batch));
            }
        }
        for (int l = 0; l < cfg.num_layers; ++l) {
            state.h[l].conservativeResize(Eigen::NoChange, batch);
            state.c[l].conservativeResize(Eigen::NoChange, batch);
        }
        detail::lstm_stack_step<S>(b, state, params, grads ? &layer_cache : nullptr);

        const ColMatX<S> h_top = state.h[cfg.num_layers - 1];
        ColMatX<S> outputs = params.w_out * h_top;
        ColMatX<S> dout(cfg.output_dim(), batch);
        if (classify) {
            for (Eigen::Index j = 0; j < batch; ++j) {
                const auto& w = windows[order[j]];
                const int target = w.targets[t];
                if (target < 0 || target >= cfg.num_classes)
                    throw IndexOutOfRange("target id outside [0, K)");
                VecX<S> col = outputs.col(j);
                const S mx = col.maxCoeff();
                VecX<S> ex = (col.array() - mx).exp();
                const S sum = ex.sum();
                stats.loss += static_cast<double>(std::log(sum) + mx - col(target)) / denom;
                Eigen::Index best;
                col.maxCoeff(&best);
                if (static_cast<int>(best) == target) ++stats.correct;
                if (grads) {
                    dout.col(j) = ex / sum;
                    dout(target, j) -= S(1);
                    dout.col(j) /= static_cast<S>(denom);
                }
            }
        } else {
            for (Eigen::Index j = 0; j < batch; ++j) {
                const auto& w = windows[order[j]];
                VecX<S> diff = outputs.col(j) - w.reg_targets.col(t);
                stats.loss += static_cast<double>(diff.squaredNorm()) / denom;
                if (grads) dout.col(j) = S(2) * diff / static_cast<S>(denom);
            }
        }

        if (grads) {
            cache[t] = {batch,   std::move(scene), std::move(xhat), std::move(dout),
                        h_top,   inv_std,          std::move(ids),  std::move(layer_cache),
                        std::move(h_prev), std::move(c_prev)};
        }
    }

    if (!grads) return stats;

    // Backward through time.
    std::vector<ColMatX<S>> dh_carry(cfg.num_layers), dc_carry(cfg.num_layers);
    for (int l = 0; l < cfg.num_layers; ++l) {
        dh_carry[l] = ColMatX<S>::Zero(d, 0);
        dc_carry[l] = ColMatX<S>::Zero(d, 0);
    }
    for (Eigen::Index t = t_max - 1; t >= 0; --t) {
        StepCache& sc = cache[t];
        const Eigen::Index batch = sc.batch;
        auto widen = [&](ColMatX<S>& m) {
            const Eigen::Index have = m.cols();
            m.conservativeResize(Eigen::NoChange, batch);
            if (batch > have) m.rightCols(batch - have).setZero();
        };

        grads->w_out += sc.dlogits * sc.h_top.transpose();
        ColMatX<S> dh_above = params.w_out.transpose() * sc.dlogits;

        for (int l = cfg.num_layers - 1; l >= 0; --l) {
            auto& lc = sc.layers[l];
            widen(dh_carry[l]);
            widen(dc_carry[l]);
            ColMatX<S> dh = dh_above + dh_carry[l];
            ColMatX<S> dgo = dh.cwiseProduct(lc.tanh_c);
            ColMatX<S> dc =
                dh.cwiseProduct(lc.go)
                    .cwiseProduct((S(1) - lc.tanh_c.array().square()).matrix()) +
                dc_carry[l];
            ColMatX<S> dgi = dc.cwiseProduct(lc.gg);
            ColMatX<S> dgf = dc.cwiseProduct(sc.c_prev[l]);
            ColMatX<S> dgg = dc.cwiseProduct(lc.gi);

            ColMatX<S> dpre(4 * d, batch);
            dpre.topRows(d) = dgi.cwiseProduct(lc.gi).cwiseProduct((S(1) - lc.gi.array()).matrix());
            dpre.middleRows(d, d) =
                dgf.cwiseProduct(lc.gf).cwiseProduct((S(1) - lc.gf.array()).matrix());
            dpre.middleRows(2 * d, d) =
                dgg.cwiseProduct((S(1) - lc.gg.array().square()).matrix());
            dpre.bottomRows(d) =
                dgo.cwiseProduct(lc.go).cwiseProduct((S(1) - lc.go.array()).matrix());

            grads->lstm[l].w_in += dpre * lc.input.transpose();
            grads->lstm[l].w_rec += dpre * sc.h_prev[l].transpose();
            grads->lstm[l].bias += dpre.rowwise().sum();

            dh_carry[l] = params.lstm[l].w_rec.transpose() * dpre;
            dc_carry[l] = dc.cwiseProduct(lc.gf);
            dh_above = params.lstm[l].w_in.transpose() * dpre;  // d input of this layer
        }

        // dh_above is now the gradient of the concatenated step input.
        ColMatX<S> dz = dh_above.bottomRows(e);
        for (Eigen::Index j = 0; j < batch; ++j) grads->w_pose.col(sc.ids[j]) += dz.col(j);

        if (cfg.use_scene) {
            ColMatX<S> dx = dh_above.middleRows(cfg.motion_dim + cfg.second_person_dim, e);
            grads->bn_gamma += dx.cwiseProduct(sc.xhat).rowwise().sum();
            grads->bn_beta += dx.rowwise().sum();
            ColMatX<S> dxhat = dx.array().colwise() * params.bn_gamma.array();
            const auto bs = static_cast<S>(batch);
            VecX<S> sum_dxhat = dxhat.rowwise().sum();
            VecX<S> sum_dxhat_xhat = dxhat.cwiseProduct(sc.xhat).rowwise().sum();
            ColMatX<S> dpre_bn =
                ((bs * dxhat.array() - sum_dxhat.replicate(1, batch).array() -
                  sc.xhat.array() * sum_dxhat_xhat.replicate(1, batch).array())
                     .colwise() *
                 (sc.inv_std.array() / bs))
                    .matrix();
            grads->w_scene += dpre_bn * sc.scene.transpose();
        }
    }
    return stats;
}

template <class S>
ModelParams<S> backward(const WindowData<S>& window, ModelParams<S>& params) {
    ModelParams<S> grads = ModelParams<S>::zeros(params.config);
    grads.set_zero();
    forward_backward<S>({window}, params, &grads, /*normalize=*/false,
                        /*update_running=*/false);
    return grads;
}

template <class S>
double global_grad_norm(ModelParams<S>& grads) {
    double sq = 0.0;
    for (auto& t : grads.tensors())
        sq += static_cast<double>(
            Eigen::Map<VecX<S>>(t.data, t.size).template cast<double>().squaredNorm());
    return std::sqrt(sq);
}

template <class S>
void adam_step(ModelParams<S>& params, ModelParams<S>& grads, AdamState<S>& state, double lr,
               double clip_norm, double beta1, double beta2, double eps) {
    if (clip_norm > 0.0) {
        const double norm = global_grad_norm(grads);
        if (norm > clip_norm) {
            const S scale = static_cast<S>(clip_norm / norm);
            for (auto& t : grads.tensors()) Eigen::Map<VecX<S>>(t.data, t.size) *= scale;
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    auto pt = params.tensors();
    auto gt = grads.tensors();
    for (std::size_t i = 0; i < pt.size(); ++i) {
        Eigen::Map<VecX<S>> p(pt[i].data, pt[i].size);
        Eigen::Map<VecX<S>> g(gt[i].data, gt[i].size);
        state.m[i] = static_cast<S>(beta1) * state.m[i] + static_cast<S>(1.0 - beta1) * g;
        state.v[i] = static_cast<S>(beta2) * state.v[i] +
                     static_cast<S>(1.0 - beta2) * g.cwiseProduct(g);
        p -= (static_cast<S>(lr) * (state.m[i] / static_cast<S>(bc1)).array() /
              ((state.v[i] / static_cast<S>(bc2)).array().sqrt() + static_cast<S>(eps)))
                 .matrix();
    }
}

}  // namespace you2me
