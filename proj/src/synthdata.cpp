#include "you2me/synthdata.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "you2me/blob.hpp"
#include "you2me/dataset.hpp"

namespace you2me {

void SynthConfig::validate() const {
    if (num_sequences < 1 || frames_per_sequence < 1 || num_pose_classes_upper < 1 ||
        num_pose_classes_lower < 1)
        throw ConfigMismatch("counts must be >= 1");
    if (num_test_sequences < 0 || num_test_sequences >= num_sequences)
        throw ConfigMismatch("num_test_sequences must be in [0, num_sequences)");
    if (coupling < 0.0 || coupling > 1.0) throw ConfigMismatch("coupling must be in [0,1]");
    if (response_lag < 1) throw ConfigMismatch("response_lag must be >= 1");
    if (interactee_hold_frames < 1) throw ConfigMismatch("interactee_hold_frames must be >= 1");
    if (activities.empty()) throw ConfigMismatch("need at least one activity label");
}

SynthConfig synth_config_from_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot open config " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    SynthConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("num_sequences", c.num_sequences);
    get("num_test_sequences", c.num_test_sequences);
    get("frames_per_sequence", c.frames_per_sequence);
    get("num_pose_classes_upper", c.num_pose_classes_upper);
    get("num_pose_classes_lower", c.num_pose_classes_lower);
    get("interactee_hold_frames", c.interactee_hold_frames);
    get("response_lag", c.response_lag);
    get("coupling", c.coupling);
    get("observation_noise_cm", c.observation_noise_cm);
    get("keypoint_noise", c.keypoint_noise);
    get("keypoint_dropout", c.keypoint_dropout);
    get("frame_dropout", c.frame_dropout);
    get("camera_motion_amplitude", c.camera_motion_amplitude);
    get("activity_offset_cm", c.activity_offset_cm);
    get("class_offset_cm", c.class_offset_cm);
    get("scene_signal", c.scene_signal);
    get("scene_noise", c.scene_noise);
    get("seed", c.seed);
    get("activities", c.activities);
    c.validate();
    return c;
}

namespace {

// Rough standing human in the canonical person-centric frame, cm. Chest
// (SpineShoulder) at the origin, shoulders on the y axis 30 cm apart.
Skeleton3D base_skeleton_kinect25() {
    Skeleton3D s(25, 3);
    s << 0, 0, -50,      // SpineBase
         0, 0, -25,      // SpineMid
         0, 0, 8,        // Neck
         0, 0, 20,       // Head
         0, -15, 0,      // ShoulderLeft
         2, -20, -25,    // ElbowLeft
         6, -22, -48,    // WristLeft
         8, -23, -55,    // HandLeft
         0, 15, 0,       // ShoulderRight
         2, 20, -25,     // ElbowRight
         6, 22, -48,     // WristRight
         8, 23, -55,     // HandRight
         0, -10, -52,    // HipLeft
         2, -11, -95,    // KneeLeft
         3, -12, -135,   // AnkleLeft
         12, -12, -140,  // FootLeft
         0, 10, -52,     // HipRight
         2, 11, -95,     // KneeRight
         3, 12, -135,    // AnkleRight
         12, 12, -140,   // FootRight
         0, 0, 0,        // SpineShoulder
         9, -24, -58,    // HandTipLeft
         7, -21, -52,    // ThumbLeft
         9, 24, -58,     // HandTipRight
         7, 21, -52;     // ThumbRight
    return s;
}

bool is_anchor(const JointLayout& layout, int j) {
    return j == layout.left_shoulder || j == layout.right_shoulder || j == layout.chest ||
           j == layout.hip_center;
}

using JointOffsets = MatX<double>;  // J x 3, zero on anchors

double proto_rms(const JointOffsets& a, const JointOffsets& b) {
    return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

}  // namespace

std::vector<Correspondence> synth_correspondences(const Eigen::Matrix3d& h_true, int n_points,
                                                  double noise_px, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Correspondence> corr(n_points);
    for (int i = 0; i < n_points; ++i) {
        corr[i].src = Eigen::Vector2d(next_unit(rng) * 1920.0, next_unit(rng) * 1080.0);
        const Eigen::Vector3d q = h_true * corr[i].src.homogeneous();
        corr[i].dst = q.hnormalized();
        if (noise_px > 0.0)
            corr[i].dst += noise_px * Eigen::Vector2d(next_gaussian(rng), next_gaussian(rng));
    }
    return corr;
}

std::filesystem::path generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    const JointLayout layout = JointLayout::kinect25();
    const Skeleton3D base = base_skeleton_kinect25();
    const int j_count = layout.joint_count();
    const int a_count = static_cast<int>(cfg.activities.size());
    const int cu = cfg.num_pose_classes_upper;
    const int cl = cfg.num_pose_classes_lower;

    std::mt19937_64 rng(cfg.seed);

    auto random_offsets = [&](double sigma, const std::vector<int>& joints) {
        JointOffsets o = JointOffsets::Zero(j_count, 3);
        for (int j : joints)
            if (!is_anchor(layout, j))
                for (int c = 0; c < 3; ++c) o(j, c) = sigma * next_gaussian(rng);
        return o;
    };

    // Activity themes plus per-class offsets, rejection-sampled so prototype
    // pairs stay at least 10 cm RMS-per-joint apart.
    std::vector<JointOffsets> themes;
    for (int a = 0; a < a_count; ++a) {
        std::vector<int> all(j_count);
        for (int j = 0; j < j_count; ++j) all[j] = j;
        themes.push_back(random_offsets(cfg.activity_offset_cm, all));
    }
    auto sample_protos = [&](const std::vector<int>& joints, int per_activity) {
        std::vector<JointOffsets> protos;
        for (int a = 0; a < a_count; ++a) {
            for (int k = 0; k < per_activity; ++k) {
                for (int attempt = 0; attempt < 200; ++attempt) {
                    JointOffsets cand = themes[a] + random_offsets(cfg.class_offset_cm, joints);
                    bool ok = true;
                    for (const auto& p : protos)
                        if (proto_rms(cand, p) < 10.0) {
                            ok = false;
                            break;
                        }
                    if (ok || attempt == 199) {
                        protos.push_back(std::move(cand));
                        break;
                    }
                }
            }
        }
        return protos;
    };
    const std::vector<JointOffsets> upper_protos = sample_protos(layout.upper_idx, cu);
    const std::vector<JointOffsets> lower_protos = sample_protos(layout.lower_idx, cl);

    // Interactee 2D keypoint prototypes, one set of 25 normalized points per
    // class, distinct across all activities.
    std::vector<Eigen::VectorXd> kp_protos;
    for (int a = 0; a < a_count * cu; ++a) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Eigen::VectorXd cand(kSecondPersonDim);
            for (int i = 0; i < kSecondPersonDim; ++i) cand(i) = 0.15 + 0.7 * next_unit(rng);
            bool ok = true;
            for (const auto& p : kp_protos)
                if ((cand - p).norm() < 1.0) {
                    ok = false;
                    break;
                }
            if (ok || attempt == 199) {
                kp_protos.push_back(std::move(cand));
                break;
            }
        }
    }

    // Response maps: a seeded permutation of the wearer classes per activity.
    std::vector<std::vector<int>> respmap(a_count);
    for (int a = 0; a < a_count; ++a) {
        respmap[a].resize(cu);
        for (int k = 0; k < cu; ++k) respmap[a][k] = k;
        for (int k = cu - 1; k > 0; --k)
            std::swap(respmap[a][k], respmap[a][next_below(rng, k + 1)]);
    }

    std::vector<Eigen::VectorXf> scene_themes(a_count);
    for (int a = 0; a < a_count; ++a) {
        scene_themes[a].resize(kSceneDim);
        for (int i = 0; i < kSceneDim; ++i)
            scene_themes[a](i) = static_cast<float>(cfg.scene_signal * next_gaussian(rng));
    }

    const int num_train = cfg.num_sequences - cfg.num_test_sequences;
    std::vector<SequenceFiles> manifest_entries;

    for (int s = 0; s < cfg.num_sequences; ++s) {
        std::mt19937_64 seq_rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (s + 1)));
        const int a = s % a_count;
        const int n = cfg.frames_per_sequence;

        std::vector<int> interactee(n), wearer(n), lower(n);
        for (int t = 0; t < n; ++t)
            interactee[t] = t % cfg.interactee_hold_frames == 0
                                ? static_cast<int>(next_below(seq_rng, cu))
                                : interactee[t - 1];
        for (int t = 0; t < n; ++t) {
            const bool coupled =
                t >= cfg.response_lag && next_unit(seq_rng) < cfg.coupling;
            wearer[t] = coupled ? respmap[a][interactee[t - cfg.response_lag]]
                                : static_cast<int>(next_below(seq_rng, cu));
            lower[t] = wearer[t] % cl;
        }

        MatX<float> gt(n, 3 * j_count), kp(n, kSecondPersonDim), scene(n, kSceneDim);
        MatX<float> hom(n, 9), corr_rows(n, 4 * 12), posture(n, 1), classes(n, 2);
        MatX<float> sp3d(n, 3 * j_count);
        for (int t = 0; t < n; ++t) {
            Skeleton3D sk = base;
            for (int j : layout.upper_idx)
                sk.row(j) += upper_protos[a * cu + wearer[t]].row(j);
            for (int j : layout.lower_idx)
                sk.row(j) += lower_protos[a * cl + lower[t]].row(j);
            for (int j = 0; j < j_count; ++j)
                for (int c = 0; c < 3; ++c)
                    sk(j, c) += cfg.observation_noise_cm * next_gaussian(seq_rng);
            for (int j = 0; j < j_count; ++j)
                gt.row(t).segment<3>(3 * j) = sk.row(j).cast<float>();

            Skeleton3D other = base;
            for (int j : layout.upper_idx)
                other.row(j) += upper_protos[a * cu + interactee[t]].row(j);
            for (int j : layout.lower_idx)
                other.row(j) += lower_protos[a * cl + interactee[t] % cl].row(j);
            for (int j = 0; j < j_count; ++j)
                for (int c = 0; c < 3; ++c)
                    sp3d(t, 3 * j + c) = static_cast<float>(
                        other(j, c) + cfg.observation_noise_cm * next_gaussian(seq_rng));

            const Eigen::VectorXd& proto = kp_protos[a * cu + interactee[t]];
            const bool frame_missed = next_unit(seq_rng) < cfg.frame_dropout;
            for (int j = 0; j < kKeypointCount; ++j) {
                const bool dropped = frame_missed || next_unit(seq_rng) < cfg.keypoint_dropout;
                const double x =
                    std::clamp(proto(2 * j) + cfg.keypoint_noise * next_gaussian(seq_rng), 0.0, 1.0);
                const double y = std::clamp(
                    proto(2 * j + 1) + cfg.keypoint_noise * next_gaussian(seq_rng), 0.0, 1.0);
                kp(t, 2 * j) = dropped ? 0.0f : static_cast<float>(x);
                kp(t, 2 * j + 1) = dropped ? 0.0f : static_cast<float>(y);
            }

            for (int i = 0; i < kSceneDim; ++i)
                scene(t, i) = scene_themes[a](i) +
                              static_cast<float>(cfg.scene_noise * next_gaussian(seq_rng));

            // Camera shake scales with wearer pose transitions; frame 0 has no
            // predecessor and carries the identity.
            Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
            if (t > 0) {
                const double g = wearer[t] != wearer[t - 1] ? 1.0 : 0.1;
                const double ang = cfg.camera_motion_amplitude * g * next_gaussian(seq_rng);
                const double tx = 50.0 * cfg.camera_motion_amplitude * g * next_gaussian(seq_rng);
                const double ty = 50.0 * cfg.camera_motion_amplitude * g * next_gaussian(seq_rng);
                h << std::cos(ang), -std::sin(ang), tx,
                     std::sin(ang), std::cos(ang), ty,
                     0, 0, 1;
                h /= h(0, 0);
            }
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) hom(t, 3 * r + c) = static_cast<float>(h(r, c));

            const auto corr =
                synth_correspondences(h, 12, 0.0, seq_rng());
            for (int i = 0; i < 12; ++i) {
                corr_rows(t, 4 * i) = static_cast<float>(corr[i].src.x());
                corr_rows(t, 4 * i + 1) = static_cast<float>(corr[i].src.y());
                corr_rows(t, 4 * i + 2) = static_cast<float>(corr[i].dst.x());
                corr_rows(t, 4 * i + 3) = static_cast<float>(corr[i].dst.y());
            }

            posture(t, 0) =
                static_cast<float>(lower[t] < (cl + 1) / 2 ? Posture::Stand : Posture::Sit);
            classes(t, 0) = static_cast<float>(a * cu + wearer[t]);
            classes(t, 1) = static_cast<float>(a * cu + interactee[t]);
        }

        SequenceFiles entry;
        entry.id = "seq" + std::to_string(s);
        entry.activity = cfg.activities[a];
        entry.split = s < num_train ? "train" : "test";
        entry.frame_count = n;
        auto emit = [&](const char* channel, const MatX<float>& m) {
            const std::string fname = entry.id + "_" + channel + ".y2m";
            write_blob(out_dir / fname, m);
            entry.files[channel] = fname;
        };
        emit("gt", gt);
        emit("keypoints2d", kp);
        emit("scene", scene);
        emit("homographies", hom);
        emit("correspondences", corr_rows);
        emit("posture", posture);
        emit("classes", classes);
        emit("second_person_3d", sp3d);
        manifest_entries.push_back(std::move(entry));
    }

    const std::filesystem::path manifest = out_dir / "manifest.json";
    write_manifest(manifest, layout, 30.0, manifest_entries,
                   {{"bayes_ceiling", cfg.bayes_ceiling()},
                    {"coupling", cfg.coupling},
                    {"response_lag", static_cast<double>(cfg.response_lag)},
                    {"upper_classes", static_cast<double>(cfg.upper_class_count())},
                    {"lower_classes", static_cast<double>(cfg.lower_class_count())}});
    return manifest;
}

}  // namespace you2me
