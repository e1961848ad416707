#pragma once

#include <filesystem>
#include <vector>

#include "you2me/features.hpp"

namespace you2me {

// Synthetic dyadic-interaction generator. The wearer's pose class at frame t
// follows a deterministic response map of the interactee's class at t - lag
// with probability `coupling`, otherwise it is uniform noise. Activities use
// disjoint prototype sets so cross-activity substitutions are far apart in
// pose space.
struct SynthConfig {
    int num_sequences = 28;
    int num_test_sequences = 8;
    int frames_per_sequence = 512;
    int num_pose_classes_upper = 4;   // wearer classes per activity
    int num_pose_classes_lower = 2;   // lower-body classes per activity
    int interactee_hold_frames = 1;   // frames the interactee keeps one class
    int response_lag = 5;
    double coupling = 0.9;
    double observation_noise_cm = 0.5;
    double keypoint_noise = 0.005;    // normalized image units
    double keypoint_dropout = 0.1;
    double frame_dropout = 0.0;       // whole-frame detector misses
    double camera_motion_amplitude = 0.02;
    double activity_offset_cm = 20.0;
    double class_offset_cm = 8.0;
    double scene_signal = 0.2;
    double scene_noise = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::string> activities = {"conversation", "hand_games", "throw_catch",
                                           "sports"};

    void validate() const;
    int upper_class_count() const {
        return static_cast<int>(activities.size()) * num_pose_classes_upper;
    }
    int lower_class_count() const {
        return static_cast<int>(activities.size()) * num_pose_classes_lower;
    }
    // Best achievable wearer-class accuracy given the coupling noise, with the
    // uniform remainder drawn within the activity's class set.
    double bayes_ceiling() const {
        return coupling + (1.0 - coupling) / num_pose_classes_upper;
    }
};

SynthConfig synth_config_from_json_file(const std::filesystem::path& path);

// Writes the full dataset bundle (blobs + manifest) and returns the manifest
// path. Byte-identical for identical configs.
std::filesystem::path generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

// Samples points in a 1920x1080 frame, maps them through H_true and perturbs
// the destinations by `noise_px`.
std::vector<Correspondence> synth_correspondences(const Eigen::Matrix3d& h_true, int n_points,
                                                  double noise_px, std::uint64_t seed);

}  // namespace you2me
