#include "you2me/skeleton.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace you2me {

void JointLayout::validate() const {
    const int j = joint_count();
    if (j <= 0) throw LayoutMismatch("empty joint list");
    std::set<int> seen;
    for (int i : upper_idx) {
        if (i < 0 || i >= j) throw LayoutMismatch("upper index out of range");
        if (!seen.insert(i).second) throw LayoutMismatch("duplicate index in partition");
    }
    for (int i : lower_idx) {
        if (i < 0 || i >= j) throw LayoutMismatch("lower index out of range");
        if (!seen.insert(i).second) throw LayoutMismatch("index in both upper and lower");
    }
    if (static_cast<int>(seen.size()) != j)
        throw LayoutMismatch("upper/lower partition does not cover all joints");
    for (int i : {left_shoulder, right_shoulder, chest, hip_center})
        if (i < 0 || i >= j) throw LayoutMismatch("reference joint index out of range");
    if (left_shoulder == right_shoulder)
        throw LayoutMismatch("left and right shoulder must differ");
}

std::uint64_t JointLayout::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& n : joint_names) h = fnv1a(n, fnv1a("|", 1, h));
    auto mix = [&h](int v) {
        std::int64_t w = v;
        h = fnv1a(&w, sizeof(w), h);
    };
    for (int i : upper_idx) mix(i);
    mix(-1);
    for (int i : lower_idx) mix(i);
    mix(left_shoulder);
    mix(right_shoulder);
    mix(chest);
    mix(hip_center);
    return h;
}

JointLayout JointLayout::kinect25() {
    JointLayout l;
    l.joint_names = {"SpineBase",     "SpineMid",   "Neck",       "Head",       "ShoulderLeft",
                     "ElbowLeft",     "WristLeft",  "HandLeft",   "ShoulderRight", "ElbowRight",
                     "WristRight",    "HandRight",  "HipLeft",    "KneeLeft",   "AnkleLeft",
                     "FootLeft",      "HipRight",   "KneeRight",  "AnkleRight", "FootRight",
                     "SpineShoulder", "HandTipLeft", "ThumbLeft", "HandTipRight", "ThumbRight"};
    l.upper_idx = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 20, 21, 22, 23, 24};
    l.lower_idx = {0, 12, 13, 14, 15, 16, 17, 18, 19};
    l.left_shoulder = 4;
    l.right_shoulder = 8;
    l.chest = 20;
    l.hip_center = 0;
    l.validate();
    return l;
}

JointLayout JointLayout::panoptic19() {
    JointLayout l;
    l.joint_names = {"Neck",      "Nose",   "MidHip", "LShoulder", "LElbow", "LWrist", "LHip",
                     "LKnee",     "LAnkle", "RShoulder", "RElbow", "RWrist", "RHip",  "RKnee",
                     "RAnkle",    "LEye",   "LEar",   "REye",      "REar"};
    l.upper_idx = {0, 1, 3, 4, 5, 9, 10, 11, 15, 16, 17, 18};
    l.lower_idx = {2, 6, 7, 8, 12, 13, 14};
    l.left_shoulder = 3;
    l.right_shoulder = 9;
    l.chest = 0;
    l.hip_center = 2;
    l.validate();
    return l;
}

Skeleton3D AlignmentFrame::apply(const Skeleton3D& s) const {
    Skeleton3D out = scale * (s * rotation.transpose());
    out.rowwise() += translation.transpose();
    return out;
}

namespace {

void check_finite(const Skeleton3D& s) {
    if (!s.allFinite()) throw NonFiniteInput("skeleton contains NaN or Inf");
}

void check_layout(const Skeleton3D& s, const JointLayout& layout) {
    layout.validate();
    if (s.rows() != layout.joint_count() || s.cols() != 3)
        throw LayoutMismatch("skeleton shape does not match layout");
}

}  // namespace

Skeleton3D normalize_person_centric(const Skeleton3D& raw, const JointLayout& layout,
                                    double reference_width) {
    check_layout(raw, layout);
    check_finite(raw);

    const Eigen::Vector3d left = raw.row(layout.left_shoulder);
    const Eigen::Vector3d right = raw.row(layout.right_shoulder);
    const Eigen::Vector3d shoulder = right - left;
    const double width = shoulder.norm();
    if (width < 1e-6) throw DegenerateShoulders("shoulder joints coincide");

    const Eigen::Vector3d up(0.0, 0.0, 1.0);
    Eigen::Vector3d shoulder_h = shoulder - shoulder.dot(up) * up;
    Eigen::Vector3d axis_y;
    if (shoulder_h.norm() < 1e-9 * width) {
        // Shoulder line vertical: facing is unconstrained, keep world y.
        axis_y = Eigen::Vector3d(0.0, 1.0, 0.0);
    } else {
        axis_y = shoulder_h.normalized();
    }
    Eigen::Vector3d axis_x = axis_y.cross(up).normalized();

    Eigen::Matrix3d rot;
    rot.row(0) = axis_x;
    rot.row(1) = axis_y;
    rot.row(2) = up;

    const Eigen::Vector3d origin = raw.row(layout.chest);
    Skeleton3D centered = raw.rowwise() - origin.transpose();
    Skeleton3D out = (reference_width / width) * (centered * rot.transpose());
    return out;
}

Skeleton3D align_for_eval(const Skeleton3D& s, const JointLayout& layout,
                          double reference_width) {
    check_layout(s, layout);
    check_finite(s);

    const Eigen::Vector3d left = s.row(layout.left_shoulder);
    const Eigen::Vector3d right = s.row(layout.right_shoulder);
    const Eigen::Vector3d shoulder = right - left;
    const double width = shoulder.norm();
    if (width < 1e-6) throw DegenerateShoulders("shoulder joints coincide");

    // Rotate about the vertical axis so the shoulder line lies in the yz plane.
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    const double hx = shoulder.x();
    const double hy = shoulder.y();
    const double hn = std::hypot(hx, hy);
    if (hn > 1e-12 * width) {
        const double c = hy / hn;
        const double sn = -hx / hn;
        rot << c, sn, 0.0,
              -sn, c, 0.0,
               0.0, 0.0, 1.0;
    }

    const Eigen::Vector3d center = s.colwise().mean();
    Skeleton3D centered = s.rowwise() - center.transpose();
    return (reference_width / width) * (centered * rot.transpose());
}

Eigen::VectorXd joint_error(const Skeleton3D& pred, const Skeleton3D& gt,
                            const JointLayout& layout) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw LayoutMismatch("prediction and ground truth shapes differ");
    const Skeleton3D a = align_for_eval(pred, layout);
    const Skeleton3D b = align_for_eval(gt, layout);
    return (a - b).rowwise().norm();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> split_pose(const Skeleton3D& s,
                                                       const JointLayout& layout) {
    check_layout(s, layout);
    Eigen::VectorXd upper(3 * layout.upper_idx.size());
    Eigen::VectorXd lower(3 * layout.lower_idx.size());
    for (std::size_t k = 0; k < layout.upper_idx.size(); ++k)
        upper.segment<3>(3 * k) = s.row(layout.upper_idx[k]);
    for (std::size_t k = 0; k < layout.lower_idx.size(); ++k)
        lower.segment<3>(3 * k) = s.row(layout.lower_idx[k]);
    return {upper, lower};
}

Skeleton3D merge_pose(const Eigen::VectorXd& upper, const Eigen::VectorXd& lower,
                      const JointLayout& layout) {
    layout.validate();
    if (upper.size() != static_cast<Eigen::Index>(3 * layout.upper_idx.size()) ||
        lower.size() != static_cast<Eigen::Index>(3 * layout.lower_idx.size()))
        throw LayoutMismatch("split vector sizes do not match layout");
    Skeleton3D s(layout.joint_count(), 3);
    for (std::size_t k = 0; k < layout.upper_idx.size(); ++k)
        s.row(layout.upper_idx[k]) = upper.segment<3>(3 * k);
    for (std::size_t k = 0; k < layout.lower_idx.size(); ++k)
        s.row(layout.lower_idx[k]) = lower.segment<3>(3 * k);
    return s;
}

}  // namespace you2me
