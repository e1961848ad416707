#pragma once

#include <string>
#include <vector>

#include "you2me/common.hpp"

namespace you2me {

// Shoulder width every skeleton is rescaled to, in cm. The same constant
// serves the modeling frame and the evaluation frame.
inline constexpr double kReferenceShoulderWidthCm = 30.0;

// J x 3 joint positions in cm.
using Skeleton3D = MatX<double>;

struct JointLayout {
    std::vector<std::string> joint_names;
    std::vector<int> upper_idx;
    std::vector<int> lower_idx;
    int left_shoulder = -1;
    int right_shoulder = -1;
    int chest = -1;       // origin of the person-centric frame
    int hip_center = -1;

    int joint_count() const { return static_cast<int>(joint_names.size()); }

    // Checks the partition and index invariants, throws LayoutMismatch.
    void validate() const;

    std::uint64_t hash() const;

    static JointLayout kinect25();
    static JointLayout panoptic19();
};

// Rigid transform plus uniform scale: p -> scale * rotation * p + translation.
struct AlignmentFrame {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double scale = 1.0;

    Skeleton3D apply(const Skeleton3D& s) const;
};

// Re-expresses a world-frame skeleton in the person-centric frame: origin at
// the chest joint, x = horizontal facing direction, y = horizontal shoulder
// line, z = vertical, rescaled to the reference shoulder width.
Skeleton3D normalize_person_centric(const Skeleton3D& raw, const JointLayout& layout,
                                    double reference_width = kReferenceShoulderWidthCm);

// Evaluation alignment: body center (mean of joints) at the origin, shoulder
// line parallel to the yz plane, shoulder distance rescaled to 30 cm.
Skeleton3D align_for_eval(const Skeleton3D& s, const JointLayout& layout,
                          double reference_width = kReferenceShoulderWidthCm);

// Per-joint Euclidean distance in cm, computed after align_for_eval on both.
Eigen::VectorXd joint_error(const Skeleton3D& pred, const Skeleton3D& gt,
                            const JointLayout& layout);

// Gathers the upper / lower joint coordinates into flat vectors, joint-major
// (x, y, z per joint in layout index order).
std::pair<Eigen::VectorXd, Eigen::VectorXd> split_pose(const Skeleton3D& s,
                                                       const JointLayout& layout);

Skeleton3D merge_pose(const Eigen::VectorXd& upper, const Eigen::VectorXd& lower,
                      const JointLayout& layout);

}  // namespace you2me
