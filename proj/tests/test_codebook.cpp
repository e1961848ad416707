#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "you2me/codebook.hpp"

using namespace you2me;

namespace {

MatX<double> gaussian_points(std::mt19937_64& rng, int n, int d, double spread = 1.0) {
    MatX<double> p(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) p(i, j) = spread * next_gaussian(rng);
    return p;
}

std::vector<Skeleton3D> random_poses(std::mt19937_64& rng, const JointLayout& layout, int n,
                                     double spread = 20.0) {
    std::vector<Skeleton3D> poses;
    for (int i = 0; i < n; ++i) {
        Skeleton3D s(layout.joint_count(), 3);
        for (Eigen::Index j = 0; j < s.rows(); ++j)
            for (int c = 0; c < 3; ++c) s(j, c) = spread * next_gaussian(rng);
        poses.push_back(std::move(s));
    }
    return poses;
}

}  // namespace

TEST_CASE("fit_kmeans separated blobs") {
    std::mt19937_64 rng(21);
    const int per = 200;
    MatX<double> pts(2 * per, 3);
    pts.topRows(per) = gaussian_points(rng, per, 3, 0.5);
    pts.bottomRows(per) = gaussian_points(rng, per, 3, 0.5);
    pts.topRows(per).col(0).array() += 50.0;
    const Eigen::RowVector3d mean_a = pts.topRows(per).colwise().mean();
    const Eigen::RowVector3d mean_b = pts.bottomRows(per).colwise().mean();

    const KMeansResult res = fit_kmeans(pts, 2, {.seed = 3});
    // Centroids match the sample means within 0.1 sigma, in either order.
    const double d0 = std::min((res.centroids.row(0) - mean_a).norm(),
                               (res.centroids.row(0) - mean_b).norm());
    const double d1 = std::min((res.centroids.row(1) - mean_a).norm(),
                               (res.centroids.row(1) - mean_b).norm());
    CHECK(d0 < 0.05);
    CHECK(d1 < 0.05);
    CHECK((res.centroids.row(0) - res.centroids.row(1)).norm() > 40.0);
}

TEST_CASE("fit_kmeans degenerate K") {
    std::mt19937_64 rng(22);
    const MatX<double> pts = gaussian_points(rng, 12, 4);

    // K = M: zero objective, centroids are the points up to permutation.
    const KMeansResult all = fit_kmeans(pts, 12, {.seed = 1});
    CHECK(all.objective_history.back() < 1e-20);
    for (int i = 0; i < 12; ++i) {
        double best = 1e300;
        for (int c = 0; c < 12; ++c)
            best = std::min(best, (pts.row(i) - all.centroids.row(c)).norm());
        CHECK(best < 1e-10);
    }

    // K = 1: the global mean.
    const KMeansResult one = fit_kmeans(pts, 1, {.seed = 1});
    CHECK((one.centroids.row(0) - pts.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(fit_kmeans(pts, 13, {}), TooFewPoints);
}

TEST_CASE("fit_kmeans objective monotone and deterministic") {
    std::mt19937_64 rng(23);
    const MatX<double> pts = gaussian_points(rng, 300, 6, 3.0);
    const KMeansResult a = fit_kmeans(pts, 17, {.seed = 5});
    for (std::size_t i = 1; i < a.objective_history.size(); ++i)
        CHECK(a.objective_history[i] <= a.objective_history[i - 1] + 1e-9);
    const KMeansResult b = fit_kmeans(pts, 17, {.seed = 5});
    CHECK((a.centroids - b.centroids).cwiseAbs().maxCoeff() == 0.0);  // bitwise
    const KMeansResult c = fit_kmeans(pts, 17, {.seed = 6});
    CHECK((a.centroids - c.centroids).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("quantize matches exhaustive search") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(24);
    const auto train = random_poses(rng, layout, 400);
    const PoseCodebook cb = build_codebook(train, layout, 24, 9, 7);
    CHECK(cb.upper_count() == 24);
    CHECK(cb.lower_count() == 9);

    const auto probes = random_poses(rng, layout, 1000);
    for (const auto& p : probes) {
        const ClusterPair got = quantize(p, cb);
        auto [u, l] = split_pose(p, layout);
        int bu = 0, bl = 0;
        double du = 1e300, dl = 1e300;
        for (int c = 0; c < cb.upper_count(); ++c) {
            const double d = (cb.upper_centroids.row(c).transpose() - u).squaredNorm();
            if (d < du) {
                du = d;
                bu = c;
            }
        }
        for (int c = 0; c < cb.lower_count(); ++c) {
            const double d = (cb.lower_centroids.row(c).transpose() - l).squaredNorm();
            if (d < dl) {
                dl = d;
                bl = c;
            }
        }
        CHECK(got.upper_id == bu);
        CHECK(got.lower_id == bl);
    }
}

TEST_CASE("quantize / reconstruct round trips") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(25);
    const auto train = random_poses(rng, layout, 100);
    const PoseCodebook cb = build_codebook(train, layout, 10, 4, 7);

    // A pose equal to a pair of centroids quantizes to that pair exactly.
    for (int i : {0, 3, 9}) {
        for (int j : {0, 2}) {
            const Skeleton3D s = reconstruct({i, j}, cb);
            CHECK(quantize(s, cb) == ClusterPair{i, j});
            CHECK((reconstruct(quantize(s, cb), cb) - s).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    CHECK_THROWS_AS(reconstruct({10, 0}, cb), IndexOutOfRange);
    CHECK_THROWS_AS(reconstruct({0, -1}, cb), IndexOutOfRange);

    // K=1 codebooks always answer (0,0) with the centroid = mean-ish pose.
    const PoseCodebook cb1 = build_codebook(train, layout, 1, 1, 7);
    for (const auto& p : random_poses(rng, layout, 10))
        CHECK(quantize(p, cb1) == ClusterPair{0, 0});

    // Identical training poses with K=1 give exactly that pose back.
    const std::vector<Skeleton3D> same(5, train[0]);
    const PoseCodebook cbsame = build_codebook(same, layout, 1, 1, 7);
    CHECK((reconstruct({0, 0}, cbsame) - train[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-codebook mode") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(26);
    const auto train = random_poses(rng, layout, 80);
    const PoseCodebook cb = build_codebook_single(train, layout, 8, 5);
    CHECK(cb.single_mode);
    CHECK(cb.upper_count() == 8);
    CHECK(cb.lower_count() == 1);
    const ClusterPair c = quantize(train[0], cb);
    CHECK(c.lower_id == 0);
    CHECK_THROWS_AS(quantize_lower(Eigen::VectorXd::Zero(27), cb), LayoutMismatch);
    const Skeleton3D r = reconstruct(c, cb);
    CHECK(quantize(r, cb).upper_id == c.upper_id);
}

TEST_CASE("quantization_stats equals brute force") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(27);
    const auto train = random_poses(rng, layout, 120);
    const PoseCodebook cb = build_codebook(train, layout, 12, 5, 7);

    const auto probes = random_poses(rng, layout, 50);
    const QuantizationStats st = quantization_stats(probes, cb);

    double joint_sum = 0.0, pose_sum = 0.0;
    std::vector<long> hist(st.histogram.size(), 0);
    for (const auto& p : probes) {
        const Skeleton3D q = reconstruct(quantize(p, cb), cb);
        const Eigen::VectorXd d = (p - q).rowwise().norm();
        joint_sum += d.mean();
        pose_sum += (p - q).norm();
        for (Eigen::Index j = 0; j < d.size(); ++j)
            hist[std::min(static_cast<std::size_t>(d(j) / st.histogram_bin_cm),
                          hist.size() - 1)]++;
    }
    CHECK(std::abs(st.mean_per_joint_cm - joint_sum / 50.0) < 1e-12);
    CHECK(std::abs(st.mean_per_pose_cm - pose_sum / 50.0) < 1e-12);
    CHECK(st.histogram == hist);

    // Centroid poses quantize at distance zero.
    std::vector<Skeleton3D> exact;
    for (int i = 0; i < cb.upper_count(); ++i) exact.push_back(reconstruct({i, 0}, cb));
    const QuantizationStats zero = quantization_stats(exact, cb);
    CHECK(zero.mean_per_joint_cm == 0.0);
    CHECK(zero.mean_per_pose_cm == 0.0);
    CHECK_THROWS_AS(quantization_stats({}, cb), EmptyInput);
}

TEST_CASE("quantization error non-increasing in K") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(28);
    const auto train = random_poses(rng, layout, 200);
    double prev = 1e300;
    for (int k : {1, 2, 4, 8}) {
        const PoseCodebook cb = build_codebook(train, layout, k, k, 7);
        const double err = quantization_stats(train, cb).mean_per_pose_cm;
        CHECK(err <= prev + 1e-9);
        prev = err;
    }
}

TEST_CASE("codebook save / load round trip") {
    const JointLayout layout = JointLayout::kinect25();
    std::mt19937_64 rng(29);
    const auto train = random_poses(rng, layout, 60);
    const PoseCodebook cb = build_codebook(train, layout, 6, 3, 11);
    const auto dir = std::filesystem::temp_directory_path() / "y2m_cb_test";
    std::filesystem::remove_all(dir);
    save_codebook(dir, cb);
    const PoseCodebook back = load_codebook(dir);
    CHECK(back.layout.hash() == cb.layout.hash());
    CHECK(back.seed == cb.seed);
    CHECK(back.single_mode == cb.single_mode);
    // Centroids round-trip through float storage.
    CHECK((back.upper_centroids.cast<float>() - cb.upper_centroids.cast<float>())
              .cwiseAbs()
              .maxCoeff() == 0.0f);
    std::filesystem::remove_all(dir);
}
