#pragma once

#include "pad/autodiff.hpp"
#include "pad/backbone.hpp"
#include "pad/manifest.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pad {

/// Learnable prompt contexts. The clean sequence is [N_1..N_L][cls]; the
/// artifact-k sequence is [A^k_1..A^k_L][cls][artifact-k], where [cls] and
/// the artifact-name tokens come from the frozen vocabulary.
struct PromptBank {
    int prompt_length = 12; // L
    std::string cls_template = "a photo of an object"; // "{object}" substitutable
    std::vector<std::string> artifact_names;            // class order 1..K
    ad::Parameter learnable_clean;                      // L x token_dim
    std::vector<ad::Parameter> learnable_artifact;      // K entries, L x token_dim
    // Ablation wiring: the "w/o LTE" variant drops the learnable rows
    // (parameters become 0 x token_dim), "w/o CLS" the template tokens.
    bool learnable_enabled = true;
    bool cls_enabled = true;

    int K() const { return static_cast<int>(artifact_names.size()); }
};

PromptBank build_prompts(const Backbone& backbone, const ClassTable& table, int prompt_length,
                         std::uint64_t seed,
                         const std::string& cls_template = "a photo of an object",
                         bool use_learnable = true, bool use_cls = true);

/// Trainable tokens that replace the first J positions of designated text
/// layers' inputs. J = 0 yields an empty schedule (vanilla encoding).
struct DeepPromptSchedule {
    int tokens_per_layer = 0;            // J
    std::vector<int> designated_layers;  // 1-based
    std::vector<ad::Parameter> tokens;   // parallel to designated_layers, J x token_dim
};

DeepPromptSchedule injection_schedule(const Backbone& backbone, int tokens_per_layer, int depth,
                                      std::uint64_t seed);

struct AnchorSet {
    Eigen::MatrixXd anchors; // (K+1) x embed_dim, row 0 = clean, unit rows

    int K() const { return static_cast<int>(anchors.rows()) - 1; }
};

/// Tape-connected anchor matrix ((K+1) x embed_dim, rows L2-normalized) with
/// gradients reaching the prompt embeddings and injection tokens.
ad::Var encode_anchor_set_var(ad::Tape& tape, PromptBank& bank, DeepPromptSchedule& schedule,
                              const Backbone& backbone,
                              const std::optional<std::string>& object_name = std::nullopt);

AnchorSet encode_anchor_set(PromptBank& bank, DeepPromptSchedule& schedule,
                            const Backbone& backbone,
                            const std::optional<std::string>& object_name = std::nullopt);

struct AnchorSeparationStats {
    double clean_vs_artifact_mean_before = 0.0;
    double clean_vs_artifact_mean_after = 0.0;
    Eigen::MatrixXd artifact_pairwise_before; // K x K cosines
    Eigen::MatrixXd artifact_pairwise_after;
};

AnchorSeparationStats anchor_separation_report(const AnchorSet& before, const AnchorSet& after);

} // namespace pad
