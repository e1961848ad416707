#include "you2me/dataset.hpp"

#include <fstream>

#include "you2me/blob.hpp"
#include "you2me/features.hpp"
#include "you2me/layout_json.hpp"

namespace you2me {

Skeleton3D SequenceRecord::skeleton_at(Eigen::Index t, int joint_count) const {
    if (t < 0 || t >= gt.rows()) throw IndexOutOfRange("frame index outside sequence");
    if (gt.cols() != 3 * joint_count) throw LayoutMismatch("gt channel width != 3J");
    Skeleton3D s(joint_count, 3);
    for (int j = 0; j < joint_count; ++j)
        s.row(j) = gt.row(t).segment<3>(3 * j).cast<double>();
    return s;
}

std::vector<int> Dataset::split_indices(const std::string& split) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < sequences.size(); ++i)
        if (sequences[i].split == split) idx.push_back(static_cast<int>(i));
    return idx;
}

void write_manifest(const std::filesystem::path& path, const JointLayout& layout, double fps,
                    const std::vector<SequenceFiles>& sequences,
                    const std::map<std::string, double>& metadata) {
    layout.validate();
    nlohmann::json j;
    j["format_version"] = 1;
    j["fps"] = fps;
    j["layout"] = layout_to_json(layout);
    j["channel_dims"] = {{"scene", kSceneDim},
                         {"keypoints2d", kSecondPersonDim},
                         {"homographies", 9},
                         {"gt", 3 * layout.joint_count()}};
    for (const auto& [k, v] : metadata) j["metadata"][k] = v;
    j["sequences"] = nlohmann::json::array();
    for (const auto& s : sequences) {
        nlohmann::json e = {{"id", s.id},
                            {"activity", s.activity},
                            {"split", s.split},
                            {"frame_count", s.frame_count},
                            {"files", s.files}};
        j["sequences"].push_back(e);
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoFailure("cannot write " + tmp.string());
        f << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

namespace {

MatX<float> homographies_from_correspondences(const MatX<float>& rows) {
    // Correspondence channel: per frame P quadruples (sx, sy, dx, dy); frame 0
    // carries no motion and gets the identity.
    if (rows.cols() % 4 != 0 || rows.cols() == 0)
        throw DimensionMismatch("correspondence channel width must be a positive multiple of 4");
    const Eigen::Index p = rows.cols() / 4;
    MatX<float> h(rows.rows(), 9);
    h.row(0) << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    std::vector<Correspondence> corr(p);
    for (Eigen::Index t = 1; t < rows.rows(); ++t) {
        for (Eigen::Index i = 0; i < p; ++i) {
            corr[i].src = Eigen::Vector2d(rows(t, 4 * i), rows(t, 4 * i + 1));
            corr[i].dst = Eigen::Vector2d(rows(t, 4 * i + 2), rows(t, 4 * i + 3));
        }
        const Eigen::Matrix3d m = estimate_homography(corr);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) h(t, 3 * r + c) = static_cast<float>(m(r, c));
    }
    return h;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoFailure("cannot open manifest " + manifest_path.string());
    nlohmann::json j = nlohmann::json::parse(f);

    Dataset ds;
    ds.layout = layout_from_json(j.at("layout"));
    ds.fps = j.at("fps").get<double>();
    if (j.contains("metadata"))
        for (auto& [k, v] : j.at("metadata").items()) ds.metadata[k] = v.get<double>();

    const std::filesystem::path base = manifest_path.parent_path();
    const int gt_cols = 3 * ds.layout.joint_count();

    for (const auto& e : j.at("sequences")) {
        SequenceRecord rec;
        rec.id = e.at("id").get<std::string>();
        rec.activity = e.at("activity").get<std::string>();
        rec.split = e.at("split").get<std::string>();
        const long n = e.at("frame_count").get<long>();
        const auto& files = e.at("files");

        auto load = [&](const char* channel) -> MatX<float> {
            if (!files.contains(channel))
                throw MissingChannel("sequence " + rec.id + " lacks channel " + channel);
            const std::filesystem::path p = base / files.at(channel).get<std::string>();
            if (!std::filesystem::exists(p))
                throw MissingChannel("file for channel " + std::string(channel) +
                                     " missing: " + p.string());
            return read_blob(p);
        };
        auto check_rows = [&](const MatX<float>& m, const char* channel) {
            if (m.rows() != n)
                throw MisalignedSequence("sequence " + rec.id + " channel " + channel + " has " +
                                         std::to_string(m.rows()) + " rows, expected " +
                                         std::to_string(n));
        };

        rec.scene = load("scene");
        check_rows(rec.scene, "scene");
        if (rec.scene.cols() != kSceneDim)
            throw DimensionMismatch("scene channel width != 2048 in " + rec.id);
        rec.keypoints2d = load("keypoints2d");
        check_rows(rec.keypoints2d, "keypoints2d");
        rec.gt = load("gt");
        check_rows(rec.gt, "gt");
        if (rec.gt.cols() != gt_cols)
            throw DimensionMismatch("gt channel width != 3J in " + rec.id);

        if (files.contains("homographies")) {
            rec.homographies = load("homographies");
        } else if (files.contains("correspondences")) {
            rec.homographies = homographies_from_correspondences(load("correspondences"));
        } else {
            throw MissingChannel("sequence " + rec.id +
                                 " needs homographies or correspondences");
        }
        check_rows(rec.homographies, "homographies");
        if (rec.homographies.cols() != 9)
            throw DimensionMismatch("homography channel width != 9 in " + rec.id);

        rec.posture.assign(n, Posture::Untagged);
        if (files.contains("posture")) {
            const MatX<float> p = load("posture");
            check_rows(p, "posture");
            for (long t = 0; t < n; ++t)
                rec.posture[t] = static_cast<Posture>(static_cast<int>(p(t, 0)));
        }
        if (files.contains("second_person_3d")) {
            rec.second_person_3d = load("second_person_3d");
            check_rows(*rec.second_person_3d, "second_person_3d");
        }
        if (files.contains("classes")) {
            rec.classes = load("classes");
            check_rows(*rec.classes, "classes");
        }
        ds.sequences.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace you2me
