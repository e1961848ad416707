#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "you2me/common.hpp"
#include "you2me/skeleton.hpp"

namespace you2me {

// Per-frame posture tags stored in the posture channel.
enum class Posture : int { Untagged = 0, Stand = 1, Sit = 2 };

// One captured or synthetic video, channels row-aligned by frame.
struct SequenceRecord {
    std::string id;
    std::string activity;
    std::string split;           // "train" or "test"
    MatX<float> scene;           // N x 2048
    MatX<float> keypoints2d;     // N x 50, normalized [0,1], zeros = missing
    MatX<float> homographies;    // N x 9, h00-normalized, row 0 identity
    MatX<float> gt;              // N x 3J, joint-major cm
    std::vector<Posture> posture;                // N, may be all Untagged
    std::optional<MatX<float>> second_person_3d; // N x 3J2
    std::optional<MatX<float>> classes;          // N x 2 generator classes (synthetic only)

    Eigen::Index frames() const { return scene.rows(); }
    Skeleton3D skeleton_at(Eigen::Index t, int joint_count) const;
};

struct Dataset {
    JointLayout layout;
    double fps = 30.0;
    std::vector<SequenceRecord> sequences;
    std::map<std::string, double> metadata;  // numeric manifest extras (e.g. bayes_ceiling)

    std::vector<int> split_indices(const std::string& split) const;
};

// Manifest description used when writing.
struct SequenceFiles {
    std::string id, activity, split;
    long frame_count = 0;
    std::map<std::string, std::string> files;  // channel -> relative path
};

void write_manifest(const std::filesystem::path& path, const JointLayout& layout, double fps,
                    const std::vector<SequenceFiles>& sequences,
                    const std::map<std::string, double>& metadata = {});

// Loads and validates a manifest: channel row counts must equal frame_count,
// required channels must exist, homographies are derived from correspondence
// files when not supplied precomputed.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace you2me
