#include "pad/model.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <string>
#include <utility>

namespace pad {

Model Model::create(const RunConfig& config) {
    config.validate();

    Model m;
    m.config = config;
    if (config.backbone == "toy") {
        m.backbone = make_toy_backbone(config.toy_config());
    } else {
        m.backbone = load_pretrained(config.backbone);
    }

    // config.validate() checked the toy geometry; a loaded checkpoint brings
    // its own, so re-check everything the config promises against it.
    const auto& vs = m.backbone.vision_spec;
    const auto& ts = m.backbone.text_spec;
    if (vs.input_size != config.input_size) {
        throw DataError("model: backbone input size " + std::to_string(vs.input_size) +
                        " does not match configured input_size " +
                        std::to_string(config.input_size));
    }
    if (config.adapter_layers > vs.layer_count) {
        throw DataError("model: adapter_layers exceeds the backbone layer count");
    }
    for (int tap : config.taps) {
        if (tap < 1 || tap > vs.layer_count) {
            throw DataError("model: tap " + std::to_string(tap) +
                            " outside backbone layers 1.." + std::to_string(vs.layer_count));
        }
    }
    if (config.deep_prompt_depth > ts.layer_count) {
        throw DataError("model: deep_prompt_depth exceeds the text layer count");
    }

    const Rng root(config.seed);
    m.adapters = make_adapter_stack(config.adapter_layers, vs.token_dim, config.beta,
                                    root.split("init/adapters").seed());
    m.projectors = make_projector_bank(config.taps, vs.token_dim, vs.embed_dim,
                                       root.split("init/projectors").seed());
    m.heads = make_heads(vs.embed_dim, config.K(), root.split("init/heads").seed());
    m.prompts = build_prompts(m.backbone, config.class_table(), config.prompt_length,
                              root.split("init/prompts").seed(), config.cls_template,
                              config.use_learnable_prompts, config.use_cls_tokens);
    m.schedule = injection_schedule(m.backbone, config.deep_prompt_tokens,
                                    config.deep_prompt_depth,
                                    root.split("init/deep-prompts").seed());
    return m;
}

std::map<std::string, std::vector<ad::Parameter*>> Model::parameter_groups() {
    std::map<std::string, std::vector<ad::Parameter*>> groups;
    auto& va = groups["vision_adapters"];
    for (Adapter& a : adapters.adapters) {
        va.push_back(&a.w);
        va.push_back(&a.ln_gamma);
        va.push_back(&a.ln_beta);
    }
    auto& pr = groups["projectors"];
    for (Projector& p : projectors.projectors) {
        pr.push_back(&p.w);
        pr.push_back(&p.b);
    }
    groups["cls_head"] = {&heads.cls_w, &heads.cls_b};
    groups["seg_head"] = {&heads.seg_w, &heads.seg_b};
    auto& pe = groups["prompt_embeddings"];
    pe.push_back(&prompts.learnable_clean);
    for (ad::Parameter& p : prompts.learnable_artifact) pe.push_back(&p);
    auto& dp = groups["deep_prompt_tokens"];
    for (ad::Parameter& p : schedule.tokens) dp.push_back(&p);
    return groups;
}

std::uint64_t Model::group_checksum(const std::string& group) {
    auto groups = parameter_groups();
    auto it = groups.find(group);
    if (it == groups.end()) {
        throw DataError("model: unknown parameter group '" + group + "'");
    }
    std::string bytes;
    for (const ad::Parameter* p : it->second) {
        bytes.append(reinterpret_cast<const char*>(p->value.data()),
                     static_cast<std::size_t>(p->value.size()) * sizeof(double));
    }
    return fnv1a64(bytes);
}

Model::VisionOut Model::vision_forward(ad::Tape& tape, const Image& image) {
    const auto& vs = backbone.vision_spec;
    if (image.height != vs.input_size || image.width != vs.input_size) {
        throw DataError("model: vision_forward expects a " + std::to_string(vs.input_size) +
                        "-pixel square input");
    }
    auto hooks = attach_hooks(adapters);
    Backbone::VisionForward fwd = backbone.encode_image_layers(tape, image, hooks);

    std::vector<ad::Var> tapped;
    tapped.reserve(projectors.taps.size());
    for (int tap : projectors.taps) {
        tapped.push_back(fwd.layer_features[static_cast<std::size_t>(tap) - 1]);
    }

    VisionOut out;
    out.f_mg = aggregate_multigranularity(tape, tapped, projectors);
    out.global = fwd.global;
    out.grid_h = vs.grid_h();
    out.grid_w = vs.grid_w();
    return out;
}

AnchorSet Model::current_anchors(const std::optional<std::string>& object_name) {
    if (cached_anchors) return *cached_anchors;
    return encode_anchor_set(prompts, schedule, backbone, object_name);
}

Predictions Model::predict_image(const Image& image, int out_h, int out_w, ScoreSource source,
                                 const std::optional<std::string>& object_name) {
    if (out_h < 1 || out_w < 1) {
        throw DataError("model: degenerate prediction size");
    }
    const int s = backbone.vision_spec.input_size;
    const bool needs_resize = image.height != s || image.width != s;
    const Image resized = needs_resize ? resize_bilinear(image, s, s) : image;

    ad::Tape tape;
    VisionOut v = vision_forward(tape, resized);

    ScoreSource resolved = source;
    if (resolved == ScoreSource::automatic) {
        resolved = cached_anchors ? ScoreSource::anchors : ScoreSource::heads;
    }

    if (resolved == ScoreSource::anchors) {
        const AnchorSet anchors = current_anchors(object_name);
        return score_against_anchors(v.global.val(), v.f_mg.val(), anchors, config.temperature,
                                     v.grid_h, v.grid_w, out_h, out_w);
    }

    // Stage-I heads path: linear maps then softmax, assembled exactly like
    // the anchor path from the per-token probabilities on.
    ad::Var cls_probs = tape.softmax_rows(classify_head(tape, v.global, heads));
    ad::Var token_probs = tape.softmax_rows(segment_head(tape, v.f_mg, heads));
    return assemble_predictions(cls_probs.val().row(0).transpose(), token_probs.val(), v.grid_h,
                                v.grid_w, out_h, out_w);
}

Predictions Model::predict_sample(const Sample& sample, ScoreSource source) {
    return predict_image(sample.image, sample.image.height, sample.image.width, source,
                         sample.object_name);
}

Predictor Model::predictor(ScoreSource source) {
    return [this, source](const Sample& s) { return predict_sample(s, source); };
}

} // namespace pad
