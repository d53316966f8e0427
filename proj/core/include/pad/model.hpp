#pragma once

#include "pad/adapters.hpp"
#include "pad/backbone.hpp"
#include "pad/config.hpp"
#include "pad/manifest.hpp"
#include "pad/metrics.hpp"
#include "pad/prompts.hpp"
#include "pad/scoring.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pad {

/// Which prediction path to use. `automatic` picks anchors once an anchor
/// cache exists (i.e. Stage II has run) and the Stage-I heads before that.
enum class ScoreSource { automatic, heads, anchors };

/// The assembled detector: a frozen dual encoder plus every trainable piece.
struct Model {
    RunConfig config;
    Backbone backbone;
    AdapterStack adapters;
    ProjectorBank projectors;
    Heads heads;
    PromptBank prompts;
    DeepPromptSchedule schedule;

    /// Anchor matrix frozen at the end of Stage II; inference and Stage III
    /// read this instead of re-encoding prompts.
    std::optional<AnchorSet> cached_anchors;
    /// Binarization threshold for predicted masks, picked on validation
    /// pixels after training.
    std::optional<double> mask_threshold;
    std::vector<std::string> completed_stages;

    static Model create(const RunConfig& config);

    /// Named trainable groups. The backbone deliberately has no group: no
    /// optimizer can reach it.
    std::map<std::string, std::vector<ad::Parameter*>> parameter_groups();
    /// FNV over every value byte of one group, in group order.
    std::uint64_t group_checksum(const std::string& group);

    struct VisionOut {
        ad::Var f_mg;   // N x embed, unit rows
        ad::Var global; // 1 x embed
        int grid_h = 0;
        int grid_w = 0;
    };
    /// Adapter-hooked backbone pass plus multi-granularity aggregation.
    /// The image must already match the backbone's input size.
    VisionOut vision_forward(ad::Tape& tape, const Image& image);

    /// Anchors for scoring: the cache when frozen, otherwise encoded fresh
    /// from the current prompt state.
    AnchorSet current_anchors(const std::optional<std::string>& object_name = std::nullopt);

    /// Full single-image inference; the input is resized to the backbone
    /// size and predictions are upsampled to (out_h, out_w).
    Predictions predict_image(const Image& image, int out_h, int out_w,
                              ScoreSource source = ScoreSource::automatic,
                              const std::optional<std::string>& object_name = std::nullopt);
    Predictions predict_sample(const Sample& sample, ScoreSource source = ScoreSource::automatic);

    /// Adapter for the metrics battery. The model must outlive the callable.
    Predictor predictor(ScoreSource source = ScoreSource::automatic);
};

} // namespace pad
