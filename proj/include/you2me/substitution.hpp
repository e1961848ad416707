#pragma once

#include <filesystem>

#include "you2me/dataset.hpp"

namespace you2me {

// Second-person source substitutions. Still / Zero / Random keep the 50-d
// channel; Gt3D / Predicted3DFile swap in a flattened 3D-pose channel (the
// model consuming it must be configured and trained for the new width).
enum class SubstitutionMode { TrueDetector, Gt3D, Still, Zero, Random, Predicted3DFile };

SubstitutionMode substitution_mode_from_string(const std::string& name);

struct SubstitutionConfig {
    SubstitutionMode mode = SubstitutionMode::TrueDetector;
    std::uint64_t seed = 0;
    std::filesystem::path predicted_3d_dir;  // blobs named <sequence id>_pred3d.y2m
};

// Channel width the substituted view exposes.
int substituted_dim(const Dataset& ds, const SubstitutionConfig& cfg);

// The per-frame second-person matrix for one sequence under the substitution.
MatX<float> substituted_second_person(const Dataset& ds, int seq_idx,
                                      const SubstitutionConfig& cfg);

}  // namespace you2me
