#include "you2me/codebook.hpp"

#include <fstream>
#include <random>

#include "you2me/blob.hpp"
#include "you2me/layout_json.hpp"

namespace you2me {

namespace {

// Squared distances from every point to one centroid.
Eigen::VectorXd sq_dist_to(const MatX<double>& points, const Eigen::RowVectorXd& c) {
    return (points.rowwise() - c).rowwise().squaredNorm();
}

MatX<double> kmeanspp_init(const MatX<double>& points, int k, std::mt19937_64& rng) {
    const Eigen::Index m = points.rows();
    MatX<double> centroids(k, points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(next_below(rng, m)));
    Eigen::VectorXd best = sq_dist_to(points, centroids.row(0));
    for (int c = 1; c < k; ++c) {
        const double total = best.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double r = next_unit(rng) * total;
            for (Eigen::Index i = 0; i < m; ++i) {
                r -= best(i);
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = static_cast<Eigen::Index>(next_below(rng, m));
        }
        centroids.row(c) = points.row(pick);
        best = best.cwiseMin(sq_dist_to(points, centroids.row(c)));
    }
    return centroids;
}

}  // namespace

KMeansResult fit_kmeans(const MatX<double>& points, int k, const KMeansOptions& opts) {
    const Eigen::Index m = points.rows();
    if (k < 1) throw TooFewPoints("k must be >= 1");
    if (m < k) throw TooFewPoints("need at least k points, got " + std::to_string(m));
    if (!points.allFinite()) throw NonFiniteInput("k-means input contains NaN or Inf");

    std::mt19937_64 rng(opts.seed);
    KMeansResult res;
    res.centroids = kmeanspp_init(points, k, rng);
    res.assignment.assign(m, 0);

    Eigen::VectorXd dist(m);
    for (int it = 0; it < opts.max_iters; ++it) {
        // Assignment: nearest centroid, ties to the lowest index.
        double objective = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            int best_c = 0;
            double best_d = (points.row(i) - res.centroids.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_c = c;
                }
            }
            res.assignment[i] = best_c;
            dist(i) = best_d;
            objective += best_d;
        }
        res.objective_history.push_back(objective);
        res.iterations = it + 1;

        // Update: means in fixed index order.
        MatX<double> next = MatX<double>::Zero(k, points.cols());
        std::vector<long> counts(k, 0);
        for (Eigen::Index i = 0; i < m; ++i) {
            next.row(res.assignment[i]) += points.row(i);
            ++counts[res.assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                next.row(c) /= static_cast<double>(counts[c]);
            } else {
                // Reseed an empty cluster to the point farthest from its
                // centroid and claim that point, so the objective still drops.
                Eigen::Index far_i;
                dist.maxCoeff(&far_i);
                next.row(c) = points.row(far_i);
                res.assignment[far_i] = c;
                dist(far_i) = 0.0;
            }
        }

        const double shift = (next - res.centroids).rowwise().norm().maxCoeff();
        res.centroids = next;
        if (shift < opts.tol) break;
    }
    return res;
}

PoseCodebook build_codebook(const std::vector<Skeleton3D>& poses, const JointLayout& layout,
                            int k_upper, int k_lower, std::uint64_t seed) {
    layout.validate();
    const auto n = static_cast<Eigen::Index>(poses.size());
    if (n < std::max(k_upper, k_lower))
        throw TooFewPoints("need at least max(K_upp, K_bot) training poses");

    MatX<double> upper(n, 3 * layout.upper_idx.size());
    MatX<double> lower(n, 3 * layout.lower_idx.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [u, l] = split_pose(poses[i], layout);
        upper.row(i) = u;
        lower.row(i) = l;
    }

    PoseCodebook cb;
    cb.layout = layout;
    cb.seed = seed;
    cb.upper_centroids = fit_kmeans(upper, k_upper, {.seed = seed}).centroids;
    cb.lower_centroids = fit_kmeans(lower, k_lower, {.seed = seed + 1}).centroids;
    return cb;
}

PoseCodebook build_codebook_single(const std::vector<Skeleton3D>& poses,
                                   const JointLayout& layout, int k, std::uint64_t seed) {
    layout.validate();
    const auto n = static_cast<Eigen::Index>(poses.size());
    if (n < k) throw TooFewPoints("need at least K training poses");
    MatX<double> full(n, 3 * layout.joint_count());
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [u, l] = split_pose(poses[i], layout);
        full.row(i) << u.transpose(), l.transpose();
    }
    PoseCodebook cb;
    cb.layout = layout;
    cb.seed = seed;
    cb.single_mode = true;
    cb.upper_centroids = fit_kmeans(full, k, {.seed = seed}).centroids;
    return cb;
}

namespace {

int nearest_row(const MatX<double>& centroids, const Eigen::VectorXd& v) {
    if (v.size() != centroids.cols()) throw LayoutMismatch("pose vector size mismatch");
    Eigen::Index best;
    (centroids.rowwise() - v.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

int quantize_upper(const Eigen::VectorXd& upper_vec, const PoseCodebook& cb) {
    return nearest_row(cb.upper_centroids, upper_vec);
}

int quantize_lower(const Eigen::VectorXd& lower_vec, const PoseCodebook& cb) {
    if (cb.single_mode) throw LayoutMismatch("single-mode codebook has no lower table");
    return nearest_row(cb.lower_centroids, lower_vec);
}

ClusterPair quantize(const Skeleton3D& s, const PoseCodebook& cb) {
    auto [u, l] = split_pose(s, cb.layout);
    if (cb.single_mode) {
        Eigen::VectorXd full(u.size() + l.size());
        full << u, l;
        return {nearest_row(cb.upper_centroids, full), 0};
    }
    return {quantize_upper(u, cb), quantize_lower(l, cb)};
}

Skeleton3D reconstruct(const ClusterPair& c, const PoseCodebook& cb) {
    if (c.upper_id < 0 || c.upper_id >= cb.upper_count() || c.lower_id < 0 ||
        c.lower_id >= cb.lower_count())
        throw IndexOutOfRange("cluster id outside codebook");
    if (cb.single_mode) {
        const Eigen::VectorXd full = cb.upper_centroids.row(c.upper_id);
        const auto nu = static_cast<Eigen::Index>(3 * cb.layout.upper_idx.size());
        return merge_pose(full.head(nu), full.tail(full.size() - nu), cb.layout);
    }
    return merge_pose(cb.upper_centroids.row(c.upper_id), cb.lower_centroids.row(c.lower_id),
                      cb.layout);
}

QuantizationStats quantization_stats(const std::vector<Skeleton3D>& poses,
                                     const PoseCodebook& cb) {
    if (poses.empty()) throw EmptyInput("no poses given");
    QuantizationStats st;
    st.histogram.assign(21, 0);
    double joint_sum = 0.0;
    double pose_sum = 0.0;
    const int j = cb.layout.joint_count();
    for (const auto& p : poses) {
        const Skeleton3D q = reconstruct(quantize(p, cb), cb);
        const Eigen::VectorXd d = (p - q).rowwise().norm();
        joint_sum += d.mean();
        pose_sum += (p - q).norm();
        for (Eigen::Index i = 0; i < j; ++i) {
            auto bin = static_cast<std::size_t>(d(i) / st.histogram_bin_cm);
            st.histogram[std::min(bin, st.histogram.size() - 1)]++;
        }
    }
    st.mean_per_joint_cm = joint_sum / static_cast<double>(poses.size());
    st.mean_per_pose_cm = pose_sum / static_cast<double>(poses.size());
    return st;
}

void save_codebook(const std::filesystem::path& dir, const PoseCodebook& cb) {
    std::filesystem::create_directories(dir);
    write_blob(dir / "upper_centroids.y2m", cb.upper_centroids.cast<float>());
    if (!cb.single_mode) write_blob(dir / "lower_centroids.y2m", cb.lower_centroids.cast<float>());
    nlohmann::json meta = {{"format_version", 1},
                           {"k_upper", cb.upper_count()},
                           {"k_lower", cb.single_mode ? 0 : cb.lower_count()},
                           {"single_mode", cb.single_mode},
                           {"seed", cb.seed},
                           {"layout", layout_to_json(cb.layout)},
                           {"layout_hash", cb.layout.hash()}};
    const std::filesystem::path tmp = dir / "codebook.json.tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoFailure("cannot write " + tmp.string());
        f << meta.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, dir / "codebook.json");
}

PoseCodebook load_codebook(const std::filesystem::path& dir) {
    std::ifstream f(dir / "codebook.json");
    if (!f) throw IoFailure("cannot open " + (dir / "codebook.json").string());
    nlohmann::json meta = nlohmann::json::parse(f);
    PoseCodebook cb;
    cb.layout = layout_from_json(meta.at("layout"));
    cb.seed = meta.at("seed").get<std::uint64_t>();
    cb.single_mode = meta.at("single_mode").get<bool>();
    cb.upper_centroids = read_blob(dir / "upper_centroids.y2m").cast<double>();
    if (!cb.single_mode)
        cb.lower_centroids = read_blob(dir / "lower_centroids.y2m").cast<double>();
    if (meta.at("layout_hash").get<std::uint64_t>() != cb.layout.hash())
        throw LayoutHashMismatch("stored layout hash disagrees with layout");
    return cb;
}

}  // namespace you2me
