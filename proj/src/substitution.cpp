#include "you2me/substitution.hpp"

#include <random>

#include "you2me/blob.hpp"

namespace you2me {

SubstitutionMode substitution_mode_from_string(const std::string& name) {
    if (name == "true_detector") return SubstitutionMode::TrueDetector;
    if (name == "gt_3d") return SubstitutionMode::Gt3D;
    if (name == "still") return SubstitutionMode::Still;
    if (name == "zero") return SubstitutionMode::Zero;
    if (name == "random") return SubstitutionMode::Random;
    if (name == "predicted_3d_file") return SubstitutionMode::Predicted3DFile;
    throw ConfigMismatch("unknown substitution mode: " + name);
}

namespace {

MatX<float> still_row(const Dataset& ds) {
    // Mean standing second-person keypoint vector over training frames.
    Eigen::VectorXd sum;
    long count = 0;
    for (const auto& rec : ds.sequences) {
        if (rec.split != "train") continue;
        if (sum.size() == 0) sum = Eigen::VectorXd::Zero(rec.keypoints2d.cols());
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            if (rec.posture[t] != Posture::Stand) continue;
            sum += rec.keypoints2d.row(t).cast<double>();
            ++count;
        }
    }
    if (count == 0) throw NoTaggedFrames("no standing-tagged training frames");
    return (sum / static_cast<double>(count)).cast<float>().transpose();
}

}  // namespace

int substituted_dim(const Dataset& ds, const SubstitutionConfig& cfg) {
    if (ds.sequences.empty()) throw EmptyInput("dataset has no sequences");
    switch (cfg.mode) {
        case SubstitutionMode::Gt3D: {
            for (const auto& rec : ds.sequences)
                if (rec.second_person_3d)
                    return static_cast<int>(rec.second_person_3d->cols());
            throw MissingChannel("no sequence carries second_person_3d");
        }
        case SubstitutionMode::Predicted3DFile: {
            const auto p = cfg.predicted_3d_dir / (ds.sequences[0].id + "_pred3d.y2m");
            return static_cast<int>(read_blob(p).cols());
        }
        default:
            return static_cast<int>(ds.sequences[0].keypoints2d.cols());
    }
}

MatX<float> substituted_second_person(const Dataset& ds, int seq_idx,
                                      const SubstitutionConfig& cfg) {
    if (seq_idx < 0 || seq_idx >= static_cast<int>(ds.sequences.size()))
        throw IndexOutOfRange("sequence index outside dataset");
    const auto& rec = ds.sequences[seq_idx];
    const Eigen::Index n = rec.frames();

    switch (cfg.mode) {
        case SubstitutionMode::TrueDetector:
            return rec.keypoints2d;
        case SubstitutionMode::Zero:
            return MatX<float>::Zero(n, rec.keypoints2d.cols());
        case SubstitutionMode::Still:
            return still_row(ds).replicate(n, 1);
        case SubstitutionMode::Random: {
            // Seeded donor choice: another sequence of another activity class.
            std::vector<int> donors;
            for (std::size_t i = 0; i < ds.sequences.size(); ++i)
                if (ds.sequences[i].activity != rec.activity)
                    donors.push_back(static_cast<int>(i));
            if (donors.empty())
                throw MissingChannel("random substitution needs another activity class");
            std::mt19937_64 rng(cfg.seed ^ fnv1a(rec.id));
            const auto& donor = ds.sequences[donors[next_below(rng, donors.size())]];
            MatX<float> out(n, donor.keypoints2d.cols());
            for (Eigen::Index t = 0; t < n; ++t)
                out.row(t) = donor.keypoints2d.row(t % donor.frames());
            return out;
        }
        case SubstitutionMode::Gt3D:
            if (!rec.second_person_3d)
                throw MissingChannel("sequence " + rec.id + " lacks second_person_3d");
            return *rec.second_person_3d;
        case SubstitutionMode::Predicted3DFile: {
            const auto p = cfg.predicted_3d_dir / (rec.id + "_pred3d.y2m");
            MatX<float> m = read_blob(p);
            if (m.rows() != n)
                throw MisalignedSequence("predicted 3D rows != frame count for " + rec.id);
            return m;
        }
    }
    throw ConfigMismatch("unhandled substitution mode");
}

}  // namespace you2me
