#pragma once

#include <optional>
#include <span>
#include <vector>

#include "you2me/common.hpp"

namespace you2me {

inline constexpr int kMotionHomographies = 15;
inline constexpr int kMotionDim = 135;   // 15 homographies x 9 entries
inline constexpr int kSceneDim = 2048;
inline constexpr int kKeypointCount = 25;
inline constexpr int kSecondPersonDim = 50;

// Pixel correspondence between frame t-1 (src) and frame t (dst).
struct Correspondence {
    Eigen::Vector2d src;
    Eigen::Vector2d dst;
};

// DLT with isotropic point conditioning; returns the 3x3 homography rescaled
// so H(0,0) = 1.
Eigen::Matrix3d estimate_homography(std::span<const Correspondence> corr);

// Vectorizes up to 15 homographies (oldest first) row-major into a 135-vector,
// padding missing leading history with identities.
Eigen::VectorXd build_motion_window(std::span<const Eigen::Matrix3d> history);

// Motion window for frame t of a sequence whose per-frame homographies are the
// rows of a N x 9 matrix (row t maps frame t-1 to frame t; row 0 is identity).
Eigen::VectorXd motion_window_at(const MatX<float>& homography_rows, int t);

// Scales 25 optional pixel keypoints to [0,1] and flattens joint-major;
// missing joints contribute (0,0). Out-of-frame coordinates are clamped and
// counted in *clamped when provided.
Eigen::VectorXd encode_second_person(std::span<const std::optional<Eigen::Vector2d>> keypoints,
                                     double image_w, double image_h, int* clamped = nullptr);

// Validates a 2048-entry scene descriptor row.
Eigen::VectorXf ingest_scene_feature(const Eigen::VectorXf& row);

}  // namespace you2me
