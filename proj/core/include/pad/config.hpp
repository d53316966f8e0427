#pragma once

#include "pad/backbone.hpp"
#include "pad/manifest.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pad {

/// Every knob the toolkit exposes, with its default. Loaded from a JSON file
/// whose keys mirror the field names; unknown keys are rejected.
struct RunConfig {
    // data / geometry
    int input_size = 518;
    int batch_size = 8;
    std::vector<std::string> artifact_names = {"ghosting", "lens_flare", "moire"};

    // backbone: "toy" or a checkpoint directory path
    std::string backbone = "toy";
    /// Toy-pair geometry when backbone == "toy". Defaults mirror the
    /// production layer layout (24 vision / 12 text layers, patch 14) at tiny
    /// widths; input size and seed always follow the run (see toy_config()).
    static ToyBackboneConfig default_toy() {
        ToyBackboneConfig t;
        t.vision_layers = 24;
        t.token_dim = 16;
        t.embed_dim = 8;
        t.patch_size = 14;
        t.vision_heads = 2;
        t.text_layers = 12;
        t.text_token_dim = 16;
        t.text_heads = 2;
        t.max_sequence = 77;
        t.vocab_size = 512;
        t.input_size = 518;
        return t;
    }
    ToyBackboneConfig toy = default_toy();

    // vision adaptation
    double beta = 0.1;
    int adapter_layers = 6;
    std::vector<int> taps = {6, 12, 18, 24};

    // prompts
    int prompt_length = 12;    // L
    int deep_prompt_tokens = 4; // J
    int deep_prompt_depth = 9;
    std::string cls_template = "a photo of an object";
    /// Ablation switches: disabling the learnable contexts builds the
    /// "w/o LTE" variant; dropping the object template, "w/o CLS".
    bool use_learnable_prompts = true;
    bool use_cls_tokens = true;

    // scoring / losses
    double temperature = 1.0;
    double lambda = 4.0;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    double dice_epsilon = 1.0;

    // training
    double learning_rate = 1e-3;
    int epochs_stage1 = 20;
    int epochs_stage2 = 20;
    int epochs_stage3 = 20;
    double grad_clip = 1.0;
    std::vector<std::string> stages = {"I", "II", "III"};

    // synthesis
    double tau_support = 0.05;
    double jitter_frac = 0.0;

    // evaluation
    double fpr_cap = 0.3;

    std::uint64_t seed = 0;

    int K() const { return static_cast<int>(artifact_names.size()); }
    ClassTable class_table() const { return ClassTable::from_artifact_names(artifact_names); }
    /// Toy geometry synced to the run's input size and root seed.
    ToyBackboneConfig toy_config() const {
        ToyBackboneConfig t = toy;
        t.input_size = input_size;
        t.seed = seed;
        return t;
    }
    void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// JSON (de)serialization; used to embed config snapshots in every output.
std::string config_to_json_string(const RunConfig& config);
RunConfig config_from_json_string(const std::string& text);

} // namespace pad
