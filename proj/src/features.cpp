#include "you2me/features.hpp"

#include <Eigen/SVD>

namespace you2me {

namespace {

// Translate points to their centroid and scale to mean distance sqrt(2).
Eigen::Matrix3d conditioning_transform(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d t;
    t << s, 0, -s * centroid.x(),
         0, s, -s * centroid.y(),
         0, 0, 1;
    return t;
}

}  // namespace

Eigen::Matrix3d estimate_homography(std::span<const Correspondence> corr) {
    if (corr.size() < 4)
        throw InsufficientCorrespondences("need at least 4, got " + std::to_string(corr.size()));
    for (const auto& c : corr)
        if (!c.src.allFinite() || !c.dst.allFinite())
            throw NonFiniteInput("correspondence contains NaN or Inf");

    std::vector<Eigen::Vector2d> src(corr.size()), dst(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) {
        src[i] = corr[i].src;
        dst[i] = corr[i].dst;
    }
    const Eigen::Matrix3d ts = conditioning_transform(src);
    const Eigen::Matrix3d td = conditioning_transform(dst);

    const auto n = static_cast<Eigen::Index>(corr.size());
    ColMatX<double> a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d p = ts * src[i].homogeneous();
        const Eigen::Vector3d q = td * dst[i].homogeneous();
        const double x = p.x() / p.z(), y = p.y() / p.z();
        const double u = q.x() / q.z(), v = q.y() / q.z();
        a.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        a.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    }

    // Full V: with exactly 4 correspondences the system is 8x9 and the null
    // direction is the 9th right singular vector, which thin V would drop.
    Eigen::JacobiSVD<ColMatX<double>> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A unique solution needs rank 8: the second-smallest singular value must
    // be well above noise level.
    if (sv(0) <= 0.0 || sv(7) / sv(0) < 1e-10)
        throw DegenerateConfiguration("rank-deficient DLT system (collinear points?)");

    Eigen::Matrix3d hn;
    const Eigen::VectorXd h = svd.matrixV().col(8);
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d out = td.inverse() * hn * ts;
    out /= out.norm();
    if (std::abs(out(0, 0)) < 1e-8)
        throw NormalizationFailure("h00 of unit solution below 1e-8");
    return out / out(0, 0);
}

Eigen::VectorXd build_motion_window(std::span<const Eigen::Matrix3d> history) {
    if (history.size() > kMotionHomographies)
        throw ShapeMismatch("motion window history longer than 15");
    Eigen::VectorXd m(kMotionDim);
    const int pad = kMotionHomographies - static_cast<int>(history.size());
    const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    for (int k = 0; k < kMotionHomographies; ++k) {
        const Eigen::Matrix3d& h = k < pad ? id : history[k - pad];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m(9 * k + 3 * r + c) = h(r, c);
    }
    return m;
}

Eigen::VectorXd motion_window_at(const MatX<float>& homography_rows, int t) {
    if (homography_rows.cols() != 9)
        throw ShapeMismatch("homography channel must have 9 columns");
    if (t < 0 || t >= homography_rows.rows())
        throw IndexOutOfRange("frame index outside sequence");
    Eigen::VectorXd m(kMotionDim);
    for (int k = 0; k < kMotionHomographies; ++k) {
        const int frame = t - (kMotionHomographies - 1) + k;
        if (frame < 0) {
            m.segment<9>(9 * k) << 1, 0, 0, 0, 1, 0, 0, 0, 1;
        } else {
            m.segment<9>(9 * k) = homography_rows.row(frame).transpose().cast<double>();
        }
    }
    return m;
}

Eigen::VectorXd encode_second_person(std::span<const std::optional<Eigen::Vector2d>> keypoints,
                                     double image_w, double image_h, int* clamped) {
    if (image_w <= 0.0 || image_h <= 0.0)
        throw DimensionMismatch("image dimensions must be positive");
    if (keypoints.size() != kKeypointCount)
        throw DimensionMismatch("expected 25 keypoints, got " + std::to_string(keypoints.size()));
    Eigen::VectorXd o = Eigen::VectorXd::Zero(kSecondPersonDim);
    for (int j = 0; j < kKeypointCount; ++j) {
        if (!keypoints[j]) continue;
        double x = keypoints[j]->x() / image_w;
        double y = keypoints[j]->y() / image_h;
        if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
            if (clamped) ++*clamped;
            x = std::clamp(x, 0.0, 1.0);
            y = std::clamp(y, 0.0, 1.0);
        }
        o(2 * j) = x;
        o(2 * j + 1) = y;
    }
    return o;
}

Eigen::VectorXf ingest_scene_feature(const Eigen::VectorXf& row) {
    if (row.size() != kSceneDim)
        throw DimensionMismatch("scene feature must have 2048 entries, got " +
                                std::to_string(row.size()));
    if (!row.allFinite()) throw NonFiniteInput("scene feature contains NaN or Inf");
    return row;
}

}  // namespace you2me
