#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "you2me/dataset.hpp"
#include "you2me/synthdata.hpp"

using namespace you2me;

namespace {

std::filesystem::path fresh_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Wearer / interactee class ids within the activity, from the classes channel.
struct ClassTrace {
    std::vector<int> wearer, interactee;
};

ClassTrace trace_of(const SequenceRecord& rec, int classes_per_activity) {
    REQUIRE(rec.classes.has_value());
    ClassTrace tr;
    for (Eigen::Index t = 0; t < rec.frames(); ++t) {
        tr.wearer.push_back(static_cast<int>((*rec.classes)(t, 0)) % classes_per_activity);
        tr.interactee.push_back(static_cast<int>((*rec.classes)(t, 1)) % classes_per_activity);
    }
    return tr;
}

}  // namespace

TEST_CASE("full coupling makes the wearer a lagged bijection of the interactee") {
    const auto dir = fresh_dir("y2m_synth_coupled");
    SynthConfig cfg;
    cfg.num_sequences = 4;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 256;
    cfg.coupling = 1.0;
    cfg.response_lag = 5;
    cfg.seed = 17;
    const Dataset ds = load_dataset(generate(cfg, dir));

    for (const auto& rec : ds.sequences) {
        const ClassTrace tr = trace_of(rec, cfg.num_pose_classes_upper);
        // Every occurrence of an interactee class maps to one wearer class.
        std::map<int, int> response;
        for (int t = cfg.response_lag; t < cfg.frames_per_sequence; ++t) {
            const int stim = tr.interactee[t - cfg.response_lag];
            const auto it = response.find(stim);
            if (it == response.end()) response[stim] = tr.wearer[t];
            else CHECK(it->second == tr.wearer[t]);
        }
        // The response map is a bijection on the activity's class set.
        REQUIRE(static_cast<int>(response.size()) == cfg.num_pose_classes_upper);
        std::map<int, int> inverse;
        for (const auto& [stim, resp] : response) inverse[resp] = stim;
        CHECK(inverse.size() == response.size());
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("zero coupling leaves wearer and lagged interactee independent") {
    const auto dir = fresh_dir("y2m_synth_uncoupled");
    SynthConfig cfg;
    cfg.num_sequences = 2;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 4096;
    cfg.coupling = 0.0;
    cfg.seed = 23;
    const Dataset ds = load_dataset(generate(cfg, dir));

    const int k = cfg.num_pose_classes_upper;
    const ClassTrace tr = trace_of(ds.sequences[0], k);
    MatX<double> joint = MatX<double>::Zero(k, k);
    for (int t = cfg.response_lag; t < cfg.frames_per_sequence; ++t)
        joint(tr.wearer[t], tr.interactee[t - cfg.response_lag]) += 1.0;
    joint /= joint.sum();
    const Eigen::VectorXd pw = joint.rowwise().sum();
    const Eigen::VectorXd pi = joint.colwise().sum();
    double mi = 0.0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            if (joint(a, b) > 0.0)
                mi += joint(a, b) * std::log2(joint(a, b) / (pw(a) * pi(b)));
    CHECK(mi < 0.05);
    std::filesystem::remove_all(dir);
}

TEST_CASE("partial coupling hits the stated ceiling empirically") {
    const auto dir = fresh_dir("y2m_synth_partial");
    SynthConfig cfg;
    cfg.num_sequences = 2;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 8192;
    cfg.coupling = 0.9;
    cfg.seed = 29;
    const Dataset ds = load_dataset(generate(cfg, dir));
    CHECK(ds.metadata.at("bayes_ceiling") == cfg.bayes_ceiling());
    CHECK(std::abs(cfg.bayes_ceiling() -
                   (cfg.coupling + (1.0 - cfg.coupling) / cfg.num_pose_classes_upper)) == 0.0);

    // Estimate the response map by majority vote, then measure how often the
    // wearer actually follows it; that rate is the best any predictor can do.
    const int k = cfg.num_pose_classes_upper;
    const ClassTrace tr = trace_of(ds.sequences[0], k);
    MatX<double> counts = MatX<double>::Zero(k, k);
    for (int t = cfg.response_lag; t < cfg.frames_per_sequence; ++t)
        counts(tr.interactee[t - cfg.response_lag], tr.wearer[t]) += 1.0;
    long hits = 0, total = 0;
    for (int t = cfg.response_lag; t < cfg.frames_per_sequence; ++t) {
        int best = 0;
        counts.row(tr.interactee[t - cfg.response_lag]).maxCoeff(&best);
        hits += tr.wearer[t] == best;
        ++total;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(total);
    CHECK(std::abs(rate - cfg.bayes_ceiling()) < 0.02);
    std::filesystem::remove_all(dir);
}

TEST_CASE("generation is byte-identical for identical configs") {
    const auto dir_a = fresh_dir("y2m_synth_det_a");
    const auto dir_b = fresh_dir("y2m_synth_det_b");
    SynthConfig cfg;
    cfg.num_sequences = 3;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 48;
    cfg.seed = 31;
    generate(cfg, dir_a);
    generate(cfg, dir_b);

    int compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
        const auto other = dir_b / entry.path().filename();
        REQUIRE(std::filesystem::exists(other));
        std::ifstream fa(entry.path(), std::ios::binary), fb(other, std::ios::binary);
        const std::vector<char> a{std::istreambuf_iterator<char>(fa), {}};
        const std::vector<char> b{std::istreambuf_iterator<char>(fb), {}};
        CHECK(a == b);
        ++compared;
    }
    CHECK(compared > 3 * 8);  // all channel blobs plus the manifest

    // A different seed changes the ground-truth payloads.
    cfg.seed = 32;
    const auto dir_c = fresh_dir("y2m_synth_det_c");
    generate(cfg, dir_c);
    std::ifstream fa(dir_a / "seq0_gt.y2m", std::ios::binary);
    std::ifstream fc(dir_c / "seq0_gt.y2m", std::ios::binary);
    const std::vector<char> a{std::istreambuf_iterator<char>(fa), {}};
    const std::vector<char> c{std::istreambuf_iterator<char>(fc), {}};
    CHECK(a != c);
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    std::filesystem::remove_all(dir_c);
}

TEST_CASE("generated skeletons normalize cleanly and classes separate in pose space") {
    const auto dir = fresh_dir("y2m_synth_poses");
    SynthConfig cfg;
    cfg.num_sequences = 4;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 64;
    cfg.observation_noise_cm = 0.0;
    cfg.seed = 37;
    const Dataset ds = load_dataset(generate(cfg, dir));

    std::map<int, Skeleton3D> class_pose;  // global wearer class -> one pose
    for (const auto& rec : ds.sequences) {
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            const Skeleton3D n = normalize_person_centric(
                rec.skeleton_at(t, ds.layout.joint_count()), ds.layout);
            CHECK(n.allFinite());
            const int cls = static_cast<int>((*rec.classes)(t, 0));
            // Noiseless frames of one class are identical after normalization.
            auto [it, fresh] = class_pose.emplace(cls, n);
            if (!fresh) CHECK((n - it->second).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
    // Distinct classes sit well apart (>= 10 cm RMS by construction).
    REQUIRE(class_pose.size() > 1);
    for (auto i = class_pose.begin(); i != class_pose.end(); ++i)
        for (auto j = std::next(i); j != class_pose.end(); ++j) {
            const double rms =
                std::sqrt((i->second - j->second).rowwise().squaredNorm().mean());
            CHECK(rms > 5.0);
        }
    std::filesystem::remove_all(dir);
}

TEST_CASE("posture tags follow the lower-body class") {
    const auto dir = fresh_dir("y2m_synth_posture");
    SynthConfig cfg;
    cfg.num_sequences = 2;
    cfg.num_test_sequences = 1;
    cfg.frames_per_sequence = 128;
    cfg.seed = 41;
    const Dataset ds = load_dataset(generate(cfg, dir));
    bool saw_stand = false, saw_sit = false;
    for (const auto& rec : ds.sequences) {
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            const int wearer = static_cast<int>((*rec.classes)(t, 0)) % cfg.num_pose_classes_upper;
            const int lower = wearer % cfg.num_pose_classes_lower;
            const Posture want = lower < (cfg.num_pose_classes_lower + 1) / 2 ? Posture::Stand
                                                                              : Posture::Sit;
            CHECK(rec.posture[t] == want);
            saw_stand |= want == Posture::Stand;
            saw_sit |= want == Posture::Sit;
        }
    }
    CHECK(saw_stand);
    CHECK(saw_sit);
    std::filesystem::remove_all(dir);
}

TEST_CASE("synth_correspondences maps source points through the homography") {
    Eigen::Matrix3d h;
    h << 1.0, 0.02, 40.0, -0.01, 1.1, -25.0, 1e-5, -2e-5, 1.0;
    const auto corr = synth_correspondences(h, 20, 0.0, 55);
    REQUIRE(corr.size() == 20);
    for (const auto& c : corr) {
        CHECK(c.src.x() >= 0.0);
        CHECK(c.src.x() <= 1920.0);
        CHECK(c.src.y() >= 0.0);
        CHECK(c.src.y() <= 1080.0);
        const Eigen::Vector2d mapped = (h * c.src.homogeneous()).hnormalized();
        CHECK((c.dst - mapped).norm() < 1e-12);
    }
    // Same seed reproduces; noise perturbs only destinations.
    const auto again = synth_correspondences(h, 20, 0.0, 55);
    for (int i = 0; i < 20; ++i) {
        CHECK(corr[i].src == again[i].src);
        CHECK(corr[i].dst == again[i].dst);
    }
    const auto noisy = synth_correspondences(h, 20, 2.0, 55);
    double total_dev = 0.0;
    for (const auto& c : noisy)
        total_dev += (c.dst - (h * c.src.homogeneous()).hnormalized()).norm();
    CHECK(total_dev / 20.0 > 0.5);  // ~2 px of noise per destination

}

TEST_CASE("config validation and JSON parsing") {
    SynthConfig c;
    c.num_test_sequences = c.num_sequences;
    CHECK_THROWS_AS(c.validate(), ConfigMismatch);
    c = {};
    c.coupling = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigMismatch);
    c = {};
    c.response_lag = 0;
    CHECK_THROWS_AS(c.validate(), ConfigMismatch);
    c = {};
    c.activities.clear();
    CHECK_THROWS_AS(c.validate(), ConfigMismatch);
    c = {};
    c.frames_per_sequence = 0;
    CHECK_THROWS_AS(c.validate(), ConfigMismatch);

    const auto dir = fresh_dir("y2m_synth_cfg");
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "cfg.json");
        f << R"({"num_sequences": 6, "num_test_sequences": 2, "coupling": 0.75,
                 "activities": ["a", "b"], "seed": 99})";
    }
    const SynthConfig parsed = synth_config_from_json_file(dir / "cfg.json");
    CHECK(parsed.num_sequences == 6);
    CHECK(parsed.num_test_sequences == 2);
    CHECK(parsed.coupling == 0.75);
    CHECK(parsed.activities == std::vector<std::string>{"a", "b"});
    CHECK(parsed.seed == 99);
    CHECK(parsed.frames_per_sequence == SynthConfig{}.frames_per_sequence);  // default kept

    {
        std::ofstream f(dir / "bad.json");
        f << R"({"num_sequences": 2, "num_test_sequences": 5})";
    }
    CHECK_THROWS_AS(synth_config_from_json_file(dir / "bad.json"), ConfigMismatch);
    CHECK_THROWS_AS(synth_config_from_json_file(dir / "missing.json"), IoFailure);
    std::filesystem::remove_all(dir);
}
