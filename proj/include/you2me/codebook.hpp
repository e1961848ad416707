#pragma once

#include <filesystem>
#include <vector>

#include "you2me/skeleton.hpp"

namespace you2me {

inline constexpr int kDefaultUpperClusters = 700;
inline constexpr int kDefaultLowerClusters = 100;
inline constexpr int kDefaultSingleClusters = 500;

struct KMeansOptions {
    int max_iters = 100;
    double tol = 1e-6;   // max centroid shift, cm
    std::uint64_t seed = 0;
};

struct KMeansResult {
    MatX<double> centroids;  // K x d
    std::vector<int> assignment;
    std::vector<double> objective_history;  // within-cluster sum of squares per iteration
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded to
// the point currently farthest from its centroid, keeping K constant.
KMeansResult fit_kmeans(const MatX<double>& points, int k, const KMeansOptions& opts = {});

struct ClusterPair {
    int upper_id = 0;
    int lower_id = 0;
    bool operator==(const ClusterPair&) const = default;
};

struct PoseCodebook {
    MatX<double> upper_centroids;  // K_upp x 3|upper|, or K x 3J in single mode
    MatX<double> lower_centroids;  // K_bot x 3|lower|, empty in single mode
    JointLayout layout;
    std::uint64_t seed = 0;
    bool single_mode = false;

    int upper_count() const { return static_cast<int>(upper_centroids.rows()); }
    int lower_count() const { return single_mode ? 1 : static_cast<int>(lower_centroids.rows()); }
};

// Fits the two codebooks independently on the split upper / lower vectors of
// person-centric poses.
PoseCodebook build_codebook(const std::vector<Skeleton3D>& poses, const JointLayout& layout,
                            int k_upper, int k_lower, std::uint64_t seed);

// Single-codebook variant clustering full-body vectors.
PoseCodebook build_codebook_single(const std::vector<Skeleton3D>& poses,
                                   const JointLayout& layout, int k, std::uint64_t seed);

int quantize_upper(const Eigen::VectorXd& upper_vec, const PoseCodebook& cb);
int quantize_lower(const Eigen::VectorXd& lower_vec, const PoseCodebook& cb);
ClusterPair quantize(const Skeleton3D& s, const PoseCodebook& cb);
Skeleton3D reconstruct(const ClusterPair& c, const PoseCodebook& cb);

struct QuantizationStats {
    double mean_per_joint_cm = 0.0;  // mean over poses and joints of joint distance
    double mean_per_pose_cm = 0.0;   // mean over poses of full-vector distance
    std::vector<long> histogram;     // per-joint distances, 0.5 cm bins, last bin open
    double histogram_bin_cm = 0.5;
};

QuantizationStats quantization_stats(const std::vector<Skeleton3D>& poses,
                                     const PoseCodebook& cb);

// Centroid matrices as a blob pair plus a JSON metadata sidecar.
void save_codebook(const std::filesystem::path& dir, const PoseCodebook& cb);
PoseCodebook load_codebook(const std::filesystem::path& dir);

}  // namespace you2me
