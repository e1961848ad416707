#pragma once

#include <nlohmann/json.hpp>

#include "you2me/skeleton.hpp"

namespace you2me {

inline nlohmann::json layout_to_json(const JointLayout& l) {
    return {{"joint_names", l.joint_names},
            {"upper_idx", l.upper_idx},
            {"lower_idx", l.lower_idx},
            {"left_shoulder", l.left_shoulder},
            {"right_shoulder", l.right_shoulder},
            {"chest", l.chest},
            {"hip_center", l.hip_center}};
}

inline JointLayout layout_from_json(const nlohmann::json& j) {
    JointLayout l;
    l.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    l.upper_idx = j.at("upper_idx").get<std::vector<int>>();
    l.lower_idx = j.at("lower_idx").get<std::vector<int>>();
    l.left_shoulder = j.at("left_shoulder").get<int>();
    l.right_shoulder = j.at("right_shoulder").get<int>();
    l.chest = j.at("chest").get<int>();
    l.hip_center = j.at("hip_center").get<int>();
    l.validate();
    return l;
}

}  // namespace you2me
