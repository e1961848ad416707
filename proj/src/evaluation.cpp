#include "you2me/evaluation.hpp"

#include <sstream>

#include "you2me/features.hpp"

namespace you2me {

namespace {

double mean_over(const Eigen::VectorXd& per_joint, const std::vector<int>& idx) {
    double s = 0.0;
    for (int j : idx) s += per_joint(j);
    return s / static_cast<double>(idx.size());
}

struct Accumulator {
    Eigen::VectorXd joint_sum;
    long frames = 0;

    void add(const Eigen::VectorXd& err) {
        if (joint_sum.size() == 0) joint_sum = Eigen::VectorXd::Zero(err.size());
        joint_sum += err;
        ++frames;
    }
};

EvalReport finalize(const std::map<std::string, Accumulator>& by_activity,
                    const JointLayout& layout) {
    EvalReport rep;
    Accumulator total;
    for (const auto& [activity, acc] : by_activity) {
        if (acc.frames == 0) continue;
        const Eigen::VectorXd per_joint = acc.joint_sum / static_cast<double>(acc.frames);
        ActivityRow row;
        row.upper_mean = mean_over(per_joint, layout.upper_idx);
        row.lower_mean = mean_over(per_joint, layout.lower_idx);
        row.overall_mean = per_joint.mean();
        row.frames = acc.frames;
        rep.per_activity[activity] = row;
        if (total.joint_sum.size() == 0)
            total.joint_sum = Eigen::VectorXd::Zero(acc.joint_sum.size());
        total.joint_sum += acc.joint_sum;
        total.frames += acc.frames;
    }
    if (total.frames == 0) throw MissingGroundTruth("no frames to evaluate");
    rep.per_joint = total.joint_sum / static_cast<double>(total.frames);
    rep.upper_mean = mean_over(rep.per_joint, layout.upper_idx);
    rep.lower_mean = mean_over(rep.per_joint, layout.lower_idx);
    rep.overall_mean = rep.per_joint.mean();
    rep.frames = total.frames;
    return rep;
}

std::vector<StepInput<float>> sequence_inputs(const SequenceRecord& rec,
                                              const MatX<float>& o_channel) {
    std::vector<StepInput<float>> seq(rec.frames());
    for (Eigen::Index t = 0; t < rec.frames(); ++t) {
        seq[t].motion = motion_window_at(rec.homographies, static_cast<int>(t)).cast<float>();
        seq[t].second_person = o_channel.row(t).transpose();
        seq[t].scene = rec.scene.row(t).transpose();
    }
    return seq;
}

}  // namespace

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "Joint error (cm), aligned per the 30 cm shoulder reference; All is the\n"
          "joint-weighted mean over all joints.\n";
    os << "activity            Upp      Bot      All   frames\n";
    char buf[128];
    for (const auto& [name, row] : per_activity) {
        std::snprintf(buf, sizeof(buf), "%-16s %8.3f %8.3f %8.3f %8ld\n", name.c_str(),
                      row.upper_mean, row.lower_mean, row.overall_mean, row.frames);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-16s %8.3f %8.3f %8.3f %8ld\n", "ALL", upper_mean,
                  lower_mean, overall_mean, frames);
    os << buf;
    std::snprintf(buf, sizeof(buf), "frame accuracy: upper %.4f lower %.4f\n", upper_accuracy,
                  lower_accuracy);
    os << buf;
    return os.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "activity,upper_cm,lower_cm,all_cm,frames\n";
    for (const auto& [name, row] : per_activity)
        os << name << "," << row.upper_mean << "," << row.lower_mean << "," << row.overall_mean
           << "," << row.frames << "\n";
    os << "ALL," << upper_mean << "," << lower_mean << "," << overall_mean << "," << frames
       << "\n";
    return os.str();
}

EvalReport evaluate(ModelParams<float>& upper, ModelParams<float>* lower, const Dataset& ds,
                    const std::string& split, const PoseCodebook& cb,
                    const SubstitutionConfig& sub) {
    if (cb.layout.hash() != ds.layout.hash())
        throw LayoutHashMismatch("codebook layout differs from dataset layout");
    if (cb.single_mode != (lower == nullptr))
        throw ConfigMismatch("single-codebook evaluation takes exactly one model");

    std::map<std::string, Accumulator> by_activity;
    long upper_hits = 0, lower_hits = 0, frames = 0;

    const auto indices = ds.split_indices(split);
    if (indices.empty()) throw MissingGroundTruth("split '" + split + "' has no sequences");
    for (int si : indices) {
        const auto& rec = ds.sequences[si];
        if (rec.activity.empty()) throw UnknownActivityTag("sequence " + rec.id);
        const auto seq = sequence_inputs(rec, substituted_second_person(ds, si, sub));
        const SequenceOutput up = forward_sequence(seq, upper, DecodeMode::Autoregressive);
        SequenceOutput low;
        if (lower) low = forward_sequence(seq, *lower, DecodeMode::Autoregressive);

        const auto normalized = normalized_sequence(rec, ds.layout);
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            const ClusterPair pred{up.predicted[t], lower ? low.predicted[t] : 0};
            const Skeleton3D pred_sk = reconstruct(pred, cb);
            by_activity[rec.activity].add(joint_error(pred_sk, normalized[t], ds.layout));
            const ClusterPair gt = quantize(normalized[t], cb);
            if (gt.upper_id == pred.upper_id) ++upper_hits;
            if (gt.lower_id == pred.lower_id) ++lower_hits;
            ++frames;
        }
    }

    EvalReport rep = finalize(by_activity, ds.layout);
    rep.upper_accuracy = static_cast<double>(upper_hits) / static_cast<double>(frames);
    rep.lower_accuracy = static_cast<double>(lower_hits) / static_cast<double>(frames);
    return rep;
}

Skeleton3D baseline_constant(const Dataset& ds, Posture tag) {
    Skeleton3D sum;
    long count = 0;
    for (int si : ds.split_indices("train")) {
        const auto& rec = ds.sequences[si];
        const auto normalized = normalized_sequence(rec, ds.layout);
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            if (rec.posture[t] != tag) continue;
            if (count == 0) sum = Skeleton3D::Zero(ds.layout.joint_count(), 3);
            sum += normalized[t];
            ++count;
        }
    }
    if (count == 0) throw NoTaggedFrames("no training frames with the requested posture tag");
    return sum / static_cast<double>(count);
}

EvalReport evaluate_constant(const Skeleton3D& pose, const Dataset& ds,
                             const std::string& split, const PoseCodebook& cb) {
    std::map<std::string, Accumulator> by_activity;
    const auto indices = ds.split_indices(split);
    if (indices.empty()) throw MissingGroundTruth("split '" + split + "' has no sequences");
    for (int si : indices) {
        const auto& rec = ds.sequences[si];
        if (rec.activity.empty()) throw UnknownActivityTag("sequence " + rec.id);
        const auto normalized = normalized_sequence(rec, ds.layout);
        for (const auto& gt : normalized)
            by_activity[rec.activity].add(joint_error(pose, gt, ds.layout));
    }
    (void)cb;
    return finalize(by_activity, ds.layout);
}

std::vector<AblationResult> run_ablations(const Dataset& ds, const PoseCodebook& cb,
                                          const ModelConfig& base_upper,
                                          const ModelConfig& base_lower,
                                          const TrainConfig& tcfg) {
    std::vector<AblationResult> results;
    for (const auto& variant : table2_variants()) {
        ModelConfig up_cfg = base_upper;
        ModelConfig low_cfg = base_lower;
        up_cfg.use_second_person = low_cfg.use_second_person = variant.use_second_person;
        up_cfg.use_scene = low_cfg.use_scene = variant.use_scene;
        auto up = train_head(ds, cb, HeadKind::Upper, up_cfg, tcfg);
        auto low = train_head(ds, cb, HeadKind::Lower, low_cfg, tcfg);
        results.push_back(
            {variant.name,
             evaluate(up.checkpoint.params, &low.checkpoint.params, ds, "test", cb)});
    }
    return results;
}

}  // namespace you2me
