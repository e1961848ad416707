#pragma once

#include "you2me/training.hpp"

namespace you2me {

struct ActivityRow {
    double upper_mean = 0.0;
    double lower_mean = 0.0;
    double overall_mean = 0.0;
    long frames = 0;
};

struct EvalReport {
    Eigen::VectorXd per_joint;       // mean error per joint, cm
    double upper_mean = 0.0;         // mean over upper-body joints
    double lower_mean = 0.0;
    double overall_mean = 0.0;       // joint-weighted mean over all joints
    std::map<std::string, ActivityRow> per_activity;
    long frames = 0;
    double upper_accuracy = 0.0;     // predicted vs quantized-gt cluster ids
    double lower_accuracy = 0.0;

    std::string to_table() const;
    std::string to_csv() const;
};

// Autoregressive decoding of the test split; predictions are reconstructed
// centroids, errors are measured against the continuous ground truth after
// eval alignment of both. `lower` is null for a single-codebook model.
EvalReport evaluate(ModelParams<float>& upper, ModelParams<float>* lower, const Dataset& ds,
                    const std::string& split, const PoseCodebook& cb,
                    const SubstitutionConfig& sub = {});

// Mean continuous training pose over frames carrying the posture tag.
Skeleton3D baseline_constant(const Dataset& ds, Posture tag);

// Evaluates any constant-pose predictor.
EvalReport evaluate_constant(const Skeleton3D& pose, const Dataset& ds,
                             const std::string& split, const PoseCodebook& cb);

struct AblationVariant {
    std::string name;
    bool use_second_person = true;
    bool use_scene = true;
};

inline std::vector<AblationVariant> table2_variants() {
    return {{"full", true, true},
            {"wo_scene", true, false},
            {"wo_second_person", false, true},
            {"wo_both", false, false}};
}

struct AblationResult {
    std::string name;
    EvalReport report;
};

// Trains and evaluates the four feature-ablation variants under the same
// protocol.
std::vector<AblationResult> run_ablations(const Dataset& ds, const PoseCodebook& cb,
                                          const ModelConfig& base_upper,
                                          const ModelConfig& base_lower,
                                          const TrainConfig& tcfg);

}  // namespace you2me
