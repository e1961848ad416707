#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "you2me/model.hpp"

namespace you2me {

// Checkpoint container: magic "Y2CK", u32 version, u32 header length, JSON
// header, then the parameter and optimizer tensors as raw scalars in
// declaration order. The header records shapes and an FNV-1a payload checksum.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},
            {"hidden_dim", c.hidden_dim},
            {"num_layers", c.num_layers},
            {"num_classes", c.num_classes},
            {"scene_dim", c.scene_dim},
            {"motion_dim", c.motion_dim},
            {"second_person_dim", c.second_person_dim},
            {"head", c.head == Head::Classification ? "classification" : "regression"},
            {"regression_output_dim", c.regression_output_dim},
            {"use_scene", c.use_scene},
            {"use_second_person", c.use_second_person}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.scene_dim = j.at("scene_dim").get<int>();
    c.motion_dim = j.at("motion_dim").get<int>();
    c.second_person_dim = j.at("second_person_dim").get<int>();
    c.head = j.at("head").get<std::string>() == "regression" ? Head::Regression
                                                             : Head::Classification;
    c.regression_output_dim = j.at("regression_output_dim").get<int>();
    c.use_scene = j.at("use_scene").get<bool>();
    c.use_second_person = j.at("use_second_person").get<bool>();
    c.validate();
    return c;
}

template <class S>
struct Checkpoint {
    ModelParams<S> params;
    AdamState<S> adam;
    int epoch = 0;  // completed epochs
};

namespace detail {

template <class S>
constexpr const char* scalar_name() {
    if constexpr (sizeof(S) == 4) return "f32";
    else return "f64";
}

template <class S>
void collect_spans(Checkpoint<S>& ck, std::vector<std::pair<S*, Eigen::Index>>& spans) {
    for (auto& t : ck.params.tensors()) spans.emplace_back(t.data, t.size);
    spans.emplace_back(ck.params.bn_mean.data(), ck.params.bn_mean.size());
    spans.emplace_back(ck.params.bn_var.data(), ck.params.bn_var.size());
    for (auto& v : ck.adam.m) spans.emplace_back(v.data(), v.size());
    for (auto& v : ck.adam.v) spans.emplace_back(v.data(), v.size());
}

}  // namespace detail

template <class S>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<S>& ck,
                     const nlohmann::json& extra = nlohmann::json::object()) {
    auto& mut = const_cast<Checkpoint<S>&>(ck);
    std::vector<std::pair<S*, Eigen::Index>> spans;
    detail::collect_spans(mut, spans);

    std::uint64_t checksum = 1469598103934665603ull;
    std::uint64_t total = 0;
    for (auto& [p, n] : spans) {
        checksum = fnv1a(p, static_cast<std::size_t>(n) * sizeof(S), checksum);
        total += static_cast<std::uint64_t>(n);
    }

    nlohmann::json header = {{"version", kCheckpointVersion},
                             {"scalar", detail::scalar_name<S>()},
                             {"config", config_to_json(ck.params.config)},
                             {"initial_pose_id", ck.params.initial_pose_id},
                             {"epoch", ck.epoch},
                             {"adam_step", ck.adam.step},
                             {"scalar_count", total},
                             {"checksum", checksum},
                             {"extra", extra}};
    const std::string hs = header.dump();

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoFailure("cannot write " + tmp.string());
        f.write("Y2CK", 4);
        const std::uint32_t version = kCheckpointVersion;
        const auto hlen = static_cast<std::uint32_t>(hs.size());
        f.write(reinterpret_cast<const char*>(&version), 4);
        f.write(reinterpret_cast<const char*>(&hlen), 4);
        f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (auto& [p, n] : spans)
            f.write(reinterpret_cast<const char*>(p),
                    static_cast<std::streamsize>(n * sizeof(S)));
        if (!f) throw IoFailure("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

template <class S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path,
                              nlohmann::json* extra = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open " + path.string());
    char magic[4];
    std::uint32_t version, hlen;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&hlen), 4);
    if (!f || std::memcmp(magic, "Y2CK", 4) != 0)
        throw BadMagic("not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
        throw ConfigMismatch("unsupported checkpoint version " + std::to_string(version));
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    if (!f) throw TruncatedFile("checkpoint header truncated in " + path.string());
    nlohmann::json header = nlohmann::json::parse(hs);
    if (header.at("scalar").get<std::string>() != detail::scalar_name<S>())
        throw ConfigMismatch("checkpoint scalar type is " +
                             header.at("scalar").get<std::string>());

    Checkpoint<S> ck;
    ck.params = ModelParams<S>::zeros(config_from_json(header.at("config")));
    ck.params.initial_pose_id = header.at("initial_pose_id").get<int>();
    ck.adam = AdamState<S>::init(ck.params);
    ck.adam.step = header.at("adam_step").get<long>();
    ck.epoch = header.at("epoch").get<int>();
    if (extra) *extra = header.at("extra");

    std::vector<std::pair<S*, Eigen::Index>> spans;
    detail::collect_spans(ck, spans);
    std::uint64_t checksum = 1469598103934665603ull;
    std::uint64_t total = 0;
    for (auto& [p, n] : spans) {
        f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(S)));
        if (f.gcount() != static_cast<std::streamsize>(n * sizeof(S)))
            throw TruncatedFile("checkpoint payload truncated in " + path.string());
        checksum = fnv1a(p, static_cast<std::size_t>(n) * sizeof(S), checksum);
        total += static_cast<std::uint64_t>(n);
    }
    if (total != header.at("scalar_count").get<std::uint64_t>() ||
        checksum != header.at("checksum").get<std::uint64_t>())
        throw ChecksumError("checkpoint payload checksum mismatch in " + path.string());
    return ck;
}

}  // namespace you2me
