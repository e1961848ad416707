#pragma once

#include <filesystem>

#include "you2me/checkpoint.hpp"
#include "you2me/codebook.hpp"
#include "you2me/dataset.hpp"
#include "you2me/substitution.hpp"

namespace you2me {

enum class HeadKind { Upper, Lower, Single };

inline const char* head_name(HeadKind h) {
    switch (h) {
        case HeadKind::Upper: return "upper";
        case HeadKind::Lower: return "lower";
        default: return "single";
    }
}

struct TrainConfig {
    int window_len = 512;
    int window_overlap = 32;
    int min_window = 64;   // terminal windows shorter than this are dropped
    int batch_size = 32;
    int epochs = 20;
    double lr_phase1 = 1e-3;
    double lr_phase2 = 1e-4;
    int lr_switch_epoch = 10;  // last epoch running at lr_phase1
    // From this epoch on, previous-pose inputs are the model's own
    // autoregressive predictions instead of ground-truth ids, reducing the
    // train/decode mismatch. 0 keeps teacher forcing throughout.
    int autoregressive_from_epoch = 0;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct WindowRef {
    int seq = 0;
    int begin = 0;
    int end = 0;  // exclusive
};

// Sliding windows with stride window_len - window_overlap, never spanning
// sequence boundaries; a terminal short window is kept when >= min_window.
std::vector<WindowRef> make_windows(const Dataset& ds, const std::string& split,
                                    const TrainConfig& cfg);

// Person-centric normalized skeleton per frame of one sequence.
std::vector<Skeleton3D> normalized_sequence(const SequenceRecord& rec, const JointLayout& layout);

// Normalized poses over a whole split, for codebook fitting and baselines.
std::vector<Skeleton3D> normalized_poses(const Dataset& ds, const std::string& split);

// Quantized per-frame target ids for one head.
std::vector<int> head_targets(const std::vector<Skeleton3D>& normalized, const PoseCodebook& cb,
                              HeadKind head);

struct LossRow {
    int epoch = 0;
    int batch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainOutput {
    Checkpoint<float> checkpoint;
    std::vector<LossRow> curve;
    double final_epoch_accuracy = 0.0;  // teacher-forced frame accuracy
};

// Trains one head on the train split. When out_dir is set, writes a
// checkpoint per epoch plus loss_curve.csv. Resuming continues the exact
// trajectory of an uninterrupted run.
TrainOutput train_head(const Dataset& ds, const PoseCodebook& cb, HeadKind head,
                       ModelConfig mcfg, const TrainConfig& tcfg,
                       const SubstitutionConfig& sub = {},
                       const std::filesystem::path& out_dir = {},
                       const Checkpoint<float>* resume_from = nullptr);

}  // namespace you2me
