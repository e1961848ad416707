#include "you2me/training.hpp"

#include <fstream>
#include <random>

#include "you2me/features.hpp"

namespace you2me {

void TrainConfig::validate() const {
    if (window_len <= window_overlap || window_overlap < 0)
        throw ConfigMismatch("window_len must exceed window_overlap >= 0");
    if (batch_size < 1 || epochs < 1) throw ConfigMismatch("batch_size and epochs must be >= 1");
    if (min_window < 1) throw ConfigMismatch("min_window must be >= 1");
    if (autoregressive_from_epoch < 0)
        throw ConfigMismatch("autoregressive_from_epoch must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"window_len", window_len},
            {"window_overlap", window_overlap},
            {"min_window", min_window},
            {"batch_size", batch_size},
            {"lr_phase1", lr_phase1},
            {"lr_phase2", lr_phase2},
            {"lr_switch_epoch", lr_switch_epoch},
            {"autoregressive_from_epoch", autoregressive_from_epoch},
            {"clip_norm", clip_norm},
            {"seed", seed}};
}

std::vector<WindowRef> make_windows(const Dataset& ds, const std::string& split,
                                    const TrainConfig& cfg) {
    cfg.validate();
    const int stride = cfg.window_len - cfg.window_overlap;
    std::vector<WindowRef> windows;
    for (int si : ds.split_indices(split)) {
        const auto& rec = ds.sequences[si];
        const int n = static_cast<int>(rec.frames());
        if (rec.gt.rows() != n || rec.keypoints2d.rows() != n)
            throw MisalignedSequence("channel lengths disagree in " + rec.id);
        for (int a = 0; a < n; a += stride) {
            const int b = std::min(a + cfg.window_len, n);
            if (b - a < cfg.window_len) {
                // Terminal short window: keep when long enough.
                if (b - a >= cfg.min_window) windows.push_back({si, a, b});
                break;
            }
            windows.push_back({si, a, b});
            if (b == n) break;
        }
    }
    return windows;
}

std::vector<Skeleton3D> normalized_sequence(const SequenceRecord& rec,
                                            const JointLayout& layout) {
    std::vector<Skeleton3D> out;
    out.reserve(rec.frames());
    for (Eigen::Index t = 0; t < rec.frames(); ++t)
        out.push_back(normalize_person_centric(rec.skeleton_at(t, layout.joint_count()), layout));
    return out;
}

std::vector<Skeleton3D> normalized_poses(const Dataset& ds, const std::string& split) {
    std::vector<Skeleton3D> out;
    for (int si : ds.split_indices(split)) {
        auto seq = normalized_sequence(ds.sequences[si], ds.layout);
        out.insert(out.end(), seq.begin(), seq.end());
    }
    return out;
}

std::vector<int> head_targets(const std::vector<Skeleton3D>& normalized, const PoseCodebook& cb,
                              HeadKind head) {
    std::vector<int> ids(normalized.size());
    for (std::size_t t = 0; t < normalized.size(); ++t) {
        const ClusterPair c = quantize(normalized[t], cb);
        ids[t] = head == HeadKind::Lower ? c.lower_id : c.upper_id;
    }
    return ids;
}

namespace {

Eigen::VectorXd head_vector(const Skeleton3D& s, const JointLayout& layout, HeadKind head) {
    auto [u, l] = split_pose(s, layout);
    switch (head) {
        case HeadKind::Upper: return u;
        case HeadKind::Lower: return l;
        default: {
            Eigen::VectorXd full(u.size() + l.size());
            full << u, l;
            return full;
        }
    }
}

}  // namespace

TrainOutput train_head(const Dataset& ds, const PoseCodebook& cb, HeadKind head,
                       ModelConfig mcfg, const TrainConfig& tcfg,
                       const SubstitutionConfig& sub, const std::filesystem::path& out_dir,
                       const Checkpoint<float>* resume_from) {
    tcfg.validate();
    if (cb.layout.hash() != ds.layout.hash())
        throw LayoutHashMismatch("codebook layout differs from dataset layout");
    if ((head == HeadKind::Single) != cb.single_mode)
        throw ConfigMismatch("head kind does not match codebook mode");

    mcfg.num_classes = head == HeadKind::Lower ? cb.lower_count() : cb.upper_count();
    mcfg.second_person_dim = substituted_dim(ds, sub);
    if (mcfg.head == Head::Regression)
        mcfg.regression_output_dim =
            head == HeadKind::Upper   ? 3 * static_cast<int>(ds.layout.upper_idx.size())
            : head == HeadKind::Lower ? 3 * static_cast<int>(ds.layout.lower_idx.size())
                                      : 3 * ds.layout.joint_count();
    mcfg.validate();

    const auto windows = make_windows(ds, "train", tcfg);
    if (windows.empty()) throw EmptyInput("no training windows");

    // Per-sequence features and targets for the train split.
    const auto train_seqs = ds.split_indices("train");
    std::map<int, std::vector<Skeleton3D>> normalized;
    std::map<int, std::vector<int>> targets;
    std::map<int, MatX<float>> o_channel;
    Eigen::VectorXd mean_pose;
    long mean_count = 0;
    for (int si : train_seqs) {
        normalized[si] = normalized_sequence(ds.sequences[si], ds.layout);
        targets[si] = head_targets(normalized[si], cb, head);
        o_channel[si] = substituted_second_person(ds, si, sub);
        if (o_channel[si].cols() != mcfg.second_person_dim)
            throw DimensionMismatch("substituted channel width varies across sequences");
        for (const auto& s : normalized[si]) {
            Eigen::VectorXd v = head_vector(s, ds.layout, head);
            if (mean_pose.size() == 0) mean_pose = Eigen::VectorXd::Zero(v.size());
            mean_pose += v;
            ++mean_count;
        }
    }
    mean_pose /= static_cast<double>(mean_count);
    int initial_pose_id;
    switch (head) {
        case HeadKind::Upper: initial_pose_id = quantize_upper(mean_pose, cb); break;
        case HeadKind::Lower: initial_pose_id = quantize_lower(mean_pose, cb); break;
        default: initial_pose_id = quantize_upper(mean_pose, cb); break;
    }

    // Assemble windows once; epochs only reshuffle the order.
    std::vector<WindowData<float>> data;
    data.reserve(windows.size());
    for (const auto& w : windows) {
        const auto& rec = ds.sequences[w.seq];
        const int len = w.end - w.begin;
        WindowData<float> wd;
        wd.motion.resize(mcfg.motion_dim, len);
        wd.second_person.resize(mcfg.second_person_dim, len);
        wd.scene.resize(mcfg.scene_dim, len);
        wd.prev_ids.resize(len);
        if (mcfg.head == Head::Classification) wd.targets.resize(len);
        else wd.reg_targets.resize(mcfg.regression_output_dim, len);
        const auto& ids = targets.at(w.seq);
        for (int t = 0; t < len; ++t) {
            const int frame = w.begin + t;
            wd.motion.col(t) = motion_window_at(rec.homographies, frame).cast<float>();
            wd.second_person.col(t) = o_channel.at(w.seq).row(frame).transpose();
            wd.scene.col(t) = rec.scene.row(frame).transpose();
            wd.prev_ids[t] = t == 0 ? 0 : ids[frame - 1];
            if (mcfg.head == Head::Classification)
                wd.targets[t] = ids[frame];
            else
                wd.reg_targets.col(t) =
                    head_vector(normalized.at(w.seq)[frame], ds.layout, head).cast<float>();
        }
        data.push_back(std::move(wd));
    }

    TrainOutput out;
    int start_epoch = 0;
    if (resume_from) {
        if (!(resume_from->params.config == mcfg))
            throw ConfigMismatch("checkpoint model config does not match");
        out.checkpoint = *resume_from;
        start_epoch = resume_from->epoch;
    } else {
        out.checkpoint.params = ModelParams<float>::init(mcfg, tcfg.seed);
        out.checkpoint.params.initial_pose_id = initial_pose_id;
        out.checkpoint.adam = AdamState<float>::init(out.checkpoint.params);
    }
    auto& params = out.checkpoint.params;
    auto& adam = out.checkpoint.adam;
    ModelParams<float> grads = ModelParams<float>::zeros(mcfg);

    std::ofstream curve_file;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto csv = out_dir / "loss_curve.csv";
        const bool fresh = !resume_from || !std::filesystem::exists(csv);
        curve_file.open(csv, fresh ? std::ios::trunc : std::ios::app);
        if (fresh) curve_file << "epoch,batch,loss,lr\n";
    }

    std::vector<int> order(data.size());

    for (int epoch = start_epoch + 1; epoch <= tcfg.epochs; ++epoch) {
        const double lr = epoch <= tcfg.lr_switch_epoch ? tcfg.lr_phase1 : tcfg.lr_phase2;
        // Order is a function of (seed, epoch) alone so a resumed run batches
        // identically to an uninterrupted one.
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::mt19937_64 shuffle_rng(tcfg.seed + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[next_below(shuffle_rng, i)]);

        long epoch_correct = 0;
        long epoch_frames = 0;
        int batch_idx = 0;
        const bool feed_back = tcfg.autoregressive_from_epoch > 0 &&
                               epoch >= tcfg.autoregressive_from_epoch &&
                               mcfg.head == Head::Classification;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            std::vector<WindowData<float>> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + tcfg.batch_size); ++i)
                batch.push_back(data[order[i]]);
            if (feed_back) {
                // Replace ground-truth previous ids with the model's own
                // autoregressive predictions before the gradient step.
                for (auto& w : batch) {
                    const int len = static_cast<int>(w.prev_ids.size());
                    std::vector<StepInput<float>> seq(len);
                    for (int t = 0; t < len; ++t) {
                        seq[t].motion = w.motion.col(t);
                        seq[t].second_person = w.second_person.col(t);
                        seq[t].scene = w.scene.col(t);
                    }
                    const SequenceOutput pred =
                        forward_sequence(seq, params, DecodeMode::Autoregressive);
                    for (int t = 1; t < len; ++t) w.prev_ids[t] = pred.predicted[t - 1];
                }
            }
            grads.set_zero();
            const BatchStats st = forward_backward<float>(batch, params, &grads);
            if (!std::isfinite(st.loss))
                throw DivergenceDetected("loss is not finite at epoch " +
                                         std::to_string(epoch));
            adam_step(params, grads, adam, lr, tcfg.clip_norm);
            out.curve.push_back({epoch, batch_idx, st.loss, lr});
            if (curve_file.is_open())
                curve_file << epoch << "," << batch_idx << "," << st.loss << "," << lr << "\n";
            epoch_correct += st.correct;
            epoch_frames += st.frames;
            ++batch_idx;
        }
        out.checkpoint.epoch = epoch;
        if (epoch_frames > 0)
            out.final_epoch_accuracy =
                static_cast<double>(epoch_correct) / static_cast<double>(epoch_frames);
        if (!out_dir.empty()) {
            nlohmann::json extra = {{"train_config", tcfg.to_json()},
                                    {"head", head_name(head)},
                                    {"layout_hash", ds.layout.hash()}};
            save_checkpoint(out_dir / ("ckpt_epoch_" + std::to_string(epoch) + ".y2mc"),
                            out.checkpoint, extra);
        }
    }
    return out;
}

}  // namespace you2me
