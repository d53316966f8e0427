#pragma once

#include "pad/autodiff.hpp"
#include "pad/image.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pad {

struct VisionBackboneSpec {
    int layer_count = 24;
    int token_dim = 1024; // d
    int input_size = 518;
    int patch_size = 14;
    int head_count = 16;
    int mlp_dim = 4096;
    int embed_dim = 768; // shared vision/text embedding dim
    bool class_token = true;

    int grid_h() const { return input_size / patch_size; }
    int grid_w() const { return input_size / patch_size; }
    int patch_tokens() const { return grid_h() * grid_w(); }
    int sequence_length() const { return patch_tokens() + (class_token ? 1 : 0); }
    void validate() const;
};

struct TextBackboneSpec {
    int layer_count = 12;
    int token_dim = 768;
    int max_sequence = 77; // V
    int head_count = 12;
    int mlp_dim = 3072;
    int embed_dim = 768;
    int vocab_size = 49408;

    void validate() const;
};

namespace detail {

struct LayerWeights {
    ad::Parameter ln1_gamma, ln1_beta;
    ad::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Parameter ln2_gamma, ln2_beta;
    ad::Parameter w1, b1, w2, b2;
};

} // namespace detail

/// Frozen dual encoder. Weights live in Parameters but are fed to tapes as
/// constants, so no training stage can touch them. The toy factory builds a
/// real (tiny) transformer pair from a seed; load_pretrained reads the same
/// structure from a checkpoint directory.
class Backbone {
public:
    /// Per-layer feature transform: receives the layer's output sequence
    /// (rows = tokens) and the 1-based layer index; its return value is what
    /// the next layer consumes.
    using Hook = std::function<ad::Var(ad::Tape&, ad::Var, int)>;

    struct VisionForward {
        /// Post-hook output of every layer, class-token row dropped: N x d.
        std::vector<ad::Var> layer_features;
        /// Pooled global embedding, 1 x embed_dim.
        ad::Var global;
    };

    VisionBackboneSpec vision_spec;
    TextBackboneSpec text_spec;

    VisionForward encode_image_layers(ad::Tape& tape, const Image& image,
                                      const std::map<int, Hook>& hooks = {}) const;

    /// `token_embeddings` is the embedded sequence (S x token_dim, S <= V).
    /// `injections` maps 1-based layer index -> J x token_dim tokens that
    /// replace the first J positions of that layer's input. Returns the
    /// pooled 1 x embed_dim text embedding (final-position convention).
    ad::Var encode_text_with_injections(ad::Tape& tape, ad::Var token_embeddings,
                                        const std::map<int, ad::Var>& injections) const;

    /// Whitespace/punctuation-splitting hash tokenizer (lowercased words,
    /// FNV-1a modulo vocab). Deterministic across runs and platforms.
    std::vector<int> tokenize(const std::string& text) const;
    Eigen::MatrixXd embed_tokens(const std::vector<int>& ids) const;

    /// FNV-1a over every weight byte in a fixed traversal order; used by
    /// tests to prove training never touches the backbone.
    std::uint64_t weight_checksum() const;

    // Weight storage (frozen).
    struct VisionWeights {
        ad::Parameter patch_embed_w, patch_embed_b;
        ad::Parameter class_token;
        ad::Parameter pos_embed;
        std::vector<detail::LayerWeights> layers;
        ad::Parameter ln_final_gamma, ln_final_beta;
        ad::Parameter proj; // token_dim x embed_dim
    } vision;

    struct TextWeights {
        ad::Parameter vocab_embed; // vocab_size x token_dim
        ad::Parameter pos_embed;   // max_sequence x token_dim
        std::vector<detail::LayerWeights> layers;
        ad::Parameter ln_final_gamma, ln_final_beta;
        ad::Parameter proj; // token_dim x embed_dim
    } text;

    /// Origin descriptor: toy backbones record their recipe so checkpoints
    /// can regenerate them instead of storing every tensor.
    struct ToyRecipe {
        bool is_toy = false;
        std::uint64_t seed = 0;
    } toy;

private:
    ad::Var run_layer(ad::Tape& tape, ad::Var x, const detail::LayerWeights& w,
                      int head_count) const;
};

struct ToyBackboneConfig {
    int vision_layers = 4;
    int token_dim = 16; // vision d
    int embed_dim = 8;
    int input_size = 32;
    int patch_size = 16;
    int vision_heads = 2;
    int text_layers = 4;
    int text_token_dim = 16;
    int text_heads = 2;
    int max_sequence = 32;
    int vocab_size = 256;
    std::uint64_t seed = 0;
};

Backbone make_toy_backbone(const ToyBackboneConfig& cfg);
Backbone make_toy_backbone(int layers, int token_dim, int embed_dim, std::uint64_t seed);

/// Checkpoint directory: backbone.json (specs + tensor index) next to
/// backbone.bin (row-major little-endian f64 blobs).
void save_backbone(const Backbone& backbone, const std::filesystem::path& dir);
Backbone load_pretrained(const std::filesystem::path& dir);

} // namespace pad
