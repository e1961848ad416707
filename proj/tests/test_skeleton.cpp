#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "you2me/skeleton.hpp"

using namespace you2me;

namespace {

Skeleton3D random_skeleton(std::mt19937_64& rng, const JointLayout& layout, double spread = 40.0) {
    Skeleton3D s(layout.joint_count(), 3);
    for (Eigen::Index j = 0; j < s.rows(); ++j)
        for (int c = 0; c < 3; ++c) s(j, c) = spread * next_gaussian(rng);
    // Keep the shoulders apart so normalization is well posed.
    s.row(layout.left_shoulder) = Eigen::RowVector3d(1.0, -17.0, 3.0);
    s.row(layout.right_shoulder) = Eigen::RowVector3d(-2.0, 14.0, 5.0);
    return s;
}

Skeleton3D rotate_z(const Skeleton3D& s, double angle) {
    Eigen::Matrix3d r;
    r << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle), 0, 0, 0, 1;
    return s * r.transpose();
}

}  // namespace

TEST_CASE("layout validation") {
    const JointLayout k = JointLayout::kinect25();
    CHECK(k.joint_count() == 25);
    CHECK(k.upper_idx.size() + k.lower_idx.size() == 25);
    const JointLayout p = JointLayout::panoptic19();
    CHECK(p.joint_count() == 19);

    JointLayout bad = k;
    bad.upper_idx.push_back(0);  // 0 already in lower
    CHECK_THROWS_AS(bad.validate(), LayoutMismatch);
    bad = k;
    bad.lower_idx.pop_back();
    CHECK_THROWS_AS(bad.validate(), LayoutMismatch);
    bad = k;
    bad.left_shoulder = bad.right_shoulder;
    CHECK_THROWS_AS(bad.validate(), LayoutMismatch);

    CHECK(k.hash() != p.hash());
    CHECK(k.hash() == JointLayout::kinect25().hash());
}

TEST_CASE("normalize_person_centric identity case") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(1);
    // Build a canonical-frame skeleton: chest at origin, shoulders on y at the
    // reference width, then check the normalization leaves it alone.
    Skeleton3D s = random_skeleton(rng, layout);
    s = normalize_person_centric(s, layout);
    const Skeleton3D again = normalize_person_centric(s, layout);
    CHECK((again - s).cwiseAbs().maxCoeff() < 1e-12);  // idempotence
    CHECK(s.row(layout.chest).norm() < 1e-12);
    const double w =
        (s.row(layout.right_shoulder) - s.row(layout.left_shoulder)).norm();
    CHECK(w == doctest::Approx(kReferenceShoulderWidthCm).epsilon(1e-9));
}

TEST_CASE("normalize_person_centric removes rigid transform and scale") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Skeleton3D s = random_skeleton(rng, layout);
        const Skeleton3D base = normalize_person_centric(s, layout);

        Skeleton3D moved = rotate_z(s, 0.5 * 3.14159265358979324);
        moved.rowwise() += Eigen::RowVector3d(5.0, 5.0, 0.0);
        CHECK((normalize_person_centric(moved, layout) - base).cwiseAbs().maxCoeff() < 1e-9);

        const Skeleton3D scaled = 2.0 * s;
        CHECK((normalize_person_centric(scaled, layout) - base).cwiseAbs().maxCoeff() < 1e-9);

        Skeleton3D both = 0.37 * rotate_z(s, next_unit(rng) * 6.28);
        both.rowwise() += Eigen::RowVector3d(next_gaussian(rng), next_gaussian(rng), 7.0);
        CHECK((normalize_person_centric(both, layout) - base).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("normalize_person_centric errors") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(3);
    Skeleton3D s = random_skeleton(rng, layout);
    s.row(layout.left_shoulder) = s.row(layout.right_shoulder);
    CHECK_THROWS_AS(normalize_person_centric(s, layout), DegenerateShoulders);
    s = random_skeleton(rng, layout);
    s(3, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(normalize_person_centric(s, layout), NonFiniteInput);
    CHECK_THROWS_AS(normalize_person_centric(Skeleton3D::Zero(4, 3), layout), LayoutMismatch);
}

TEST_CASE("align_for_eval shoulder distance and idempotence") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(4);
    const Skeleton3D s = random_skeleton(rng, layout);
    const Skeleton3D a = align_for_eval(s, layout);
    const double w = (a.row(layout.right_shoulder) - a.row(layout.left_shoulder)).norm();
    CHECK(w == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(a.colwise().mean().norm() < 1e-9);          // body center at origin
    CHECK(std::abs(a(layout.right_shoulder, 0) - a(layout.left_shoulder, 0)) <
          1e-9);                                       // shoulder line in yz plane
    const Skeleton3D b = align_for_eval(a, layout);
    CHECK((b - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("align_for_eval invariance to vertical rotation, translation, scale") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Skeleton3D s = random_skeleton(rng, layout);
        const Skeleton3D base = align_for_eval(s, layout);
        Skeleton3D moved = (0.2 + 3.0 * next_unit(rng)) * rotate_z(s, next_unit(rng) * 6.28);
        moved.rowwise() += Eigen::RowVector3d(100.0 * next_gaussian(rng),
                                              100.0 * next_gaussian(rng),
                                              100.0 * next_gaussian(rng));
        CHECK((align_for_eval(moved, layout) - base).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("joint_error basics and brute-force oracle") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(6);
    const Skeleton3D s = random_skeleton(rng, layout);
    CHECK(joint_error(s, s, layout).maxCoeff() < 1e-12);

    // 1 cm offset applied after alignment moves exactly that joint by 1 cm in
    // the aligned frame's own distance computation.
    const Skeleton3D a = align_for_eval(s, layout);
    Skeleton3D off = a;
    off(6, 2) += 1.0;
    const Eigen::VectorXd d = (off - a).rowwise().norm();
    CHECK(d(6) == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index j = 0; j < d.size(); ++j)
        if (j != 6) CHECK(d(j) == 0.0);

    // Random pair vs direct recomputation.
    const Skeleton3D g = random_skeleton(rng, layout);
    const Eigen::VectorXd got = joint_error(s, g, layout);
    const Eigen::VectorXd want =
        (align_for_eval(s, layout) - align_for_eval(g, layout)).rowwise().norm();
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    // Symmetry.
    CHECK((joint_error(g, s, layout) - got).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(joint_error(s, Skeleton3D::Zero(4, 3), layout), LayoutMismatch);
}

TEST_CASE("split/merge round trip") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(7);
    const Skeleton3D s = random_skeleton(rng, layout);
    auto [u, l] = split_pose(s, layout);
    CHECK(u.size() == 3 * static_cast<Eigen::Index>(layout.upper_idx.size()));
    CHECK(l.size() == 3 * static_cast<Eigen::Index>(layout.lower_idx.size()));
    CHECK(u.size() + l.size() == 75);  // J=25 gives 75 coordinates
    const Skeleton3D back = merge_pose(u, l, layout);
    CHECK((back - s).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(merge_pose(u.head(3), l, layout), LayoutMismatch);
}

TEST_CASE("AlignmentFrame invariants") {
    AlignmentFrame f;
    f.rotation = rotate_z(Skeleton3D::Identity(3, 3), 0.7);
    f.translation = Eigen::Vector3d(1, 2, 3);
    f.scale = 2.5;
    CHECK((f.rotation.transpose() * f.rotation - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK(f.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    Skeleton3D p(1, 3);
    p << 1, 0, 0;
    const Skeleton3D q = f.apply(p);
    CHECK((q.row(0).transpose() -
           (f.scale * f.rotation * Eigen::Vector3d(1, 0, 0) + f.translation))
              .norm() < 1e-12);
}
