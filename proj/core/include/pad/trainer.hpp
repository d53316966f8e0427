#pragma once

#include "pad/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pad {

enum class Stage { I, II, III };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

/// Which parameter groups each stage may touch. The backbone has no group,
/// so it can never appear here.
///   I   -> vision_adapters, projectors, cls_head, seg_head
///   II  -> prompt_embeddings, deep_prompt_tokens
///   III -> vision_adapters, projectors
std::vector<std::string> trainable_parameters(Stage stage);

struct StageConfig {
    Stage stage = Stage::I;
    int epochs = 20;
    double learning_rate = 1e-3;
    int batch_size = 8;
    std::vector<std::string> trainable_groups;
    double grad_clip = 1.0; // global norm; 0 disables

    static StageConfig from_run_config(const RunConfig& config, Stage stage);
    void validate() const;
};

struct StepLog {
    std::string stage;
    int epoch = 0;
    int step = 0; // -1 marks the per-epoch validation entry
    bool val = false;
    LossBreakdown loss;
};

/// Adam over an explicit parameter list, with optional global-norm gradient
/// clipping. Constructed fresh at every stage boundary.
class Adam {
public:
    Adam(std::vector<ad::Parameter*> params, double learning_rate, double grad_clip,
         double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    void step();

    int steps_taken() const { return t_; }

private:
    struct Slot {
        Eigen::MatrixXd m, v;
    };
    std::vector<ad::Parameter*> params_;
    std::vector<Slot> slots_;
    double lr_, clip_, beta1_, beta2_, eps_;
    int t_ = 0;
};

/// Runs one training stage over the given splits. Only the stage's groups
/// move; everything else is bit-identical afterwards. Sampling is
/// class-balanced (clean included) and fully determined by the config seed —
/// independent of any other stage's draws, so stage-boundary resume matches
/// an uninterrupted run.
std::vector<StepLog> run_stage(Model& model, const StageConfig& stage_config,
                               const std::vector<const Sample*>& train,
                               const std::vector<const Sample*>& val);

struct TrainResult {
    std::vector<StepLog> log;
    std::filesystem::path final_checkpoint;
};

/// Executes config.stages in order, checkpointing into out_dir after each
/// stage ("stage-I", ...) and at the end ("final"). Stage II freezes the
/// anchor cache when it completes; the mask threshold is picked on
/// validation pixels (train pixels if no val split) before the final save.
TrainResult train_full(Model& model, const DatasetManifest& manifest,
                       const std::filesystem::path& out_dir);

/// Directory layout: model.json (config snapshot, stage markers, tensor
/// index) + params.bin; non-toy backbones are embedded under backbone/.
void save_checkpoint(Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir,
                      std::optional<int> expected_K = std::nullopt);

} // namespace pad
