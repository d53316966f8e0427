#include "pad/prompts.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <cmath>

namespace pad {

namespace {

Eigen::MatrixXd gaussian(Rng rng, int rows, int cols, double sigma) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = sigma * rng.normal();
        }
    }
    return m;
}

std::string instantiate_template(const std::string& tmpl, const std::string& object_name) {
    const std::string key = "{object}";
    auto pos = tmpl.find(key);
    if (pos == std::string::npos) return tmpl;
    std::string out = tmpl;
    out.replace(pos, key.size(), object_name);
    return out;
}

} // namespace

PromptBank build_prompts(const Backbone& backbone, const ClassTable& table, int prompt_length,
                         std::uint64_t seed, const std::string& cls_template, bool use_learnable,
                         bool use_cls) {
    if (prompt_length < 1) throw DataError("build_prompts: prompt length must be >= 1");
    if (!use_learnable && !use_cls) {
        throw DataError("build_prompts: the clean sequence needs learnable or template tokens");
    }
    table.validate();

    PromptBank bank;
    bank.prompt_length = prompt_length;
    bank.cls_template = cls_template;
    bank.learnable_enabled = use_learnable;
    bank.cls_enabled = use_cls;
    for (const auto& cls : table.classes) {
        if (cls.id > 0) bank.artifact_names.push_back(cls.name);
    }

    const int effective_length = use_learnable ? prompt_length : 0;
    const int td = backbone.text_spec.token_dim;
    const int v = backbone.text_spec.max_sequence;
    const auto cls_ids =
        use_cls ? backbone.tokenize(instantiate_template(cls_template, "object"))
                : std::vector<int>{};
    if (use_cls && cls_ids.empty()) {
        throw DataError("build_prompts: the template tokenizes to nothing");
    }
    for (const auto& name : bank.artifact_names) {
        const auto artifact_ids = backbone.tokenize(name);
        if (artifact_ids.empty()) {
            throw DataError("build_prompts: artifact name \"" + name +
                            "\" tokenizes to nothing");
        }
        const int total =
            effective_length + static_cast<int>(cls_ids.size() + artifact_ids.size());
        if (total > v) {
            throw DataError("build_prompts: sequence length " + std::to_string(total) +
                            " for class \"" + name + "\" exceeds max sequence " +
                            std::to_string(v));
        }
    }

    Rng root(seed);
    bank.learnable_clean = ad::Parameter(
        "prompt.clean", gaussian(root.split("prompt/clean"), effective_length, td, 0.02));
    for (const auto& name : bank.artifact_names) {
        bank.learnable_artifact.emplace_back(
            "prompt.artifact." + name,
            gaussian(root.split("prompt/artifact/" + name), effective_length, td, 0.02));
    }
    return bank;
}

DeepPromptSchedule injection_schedule(const Backbone& backbone, int tokens_per_layer, int depth,
                                      std::uint64_t seed) {
    if (tokens_per_layer < 0) throw DataError("injection_schedule: J must be >= 0");
    if (tokens_per_layer >= backbone.text_spec.max_sequence) {
        throw DataError("injection_schedule: J must stay below the max sequence length");
    }
    if (depth < 0 || depth > backbone.text_spec.layer_count) {
        throw DataError("injection_schedule: depth outside 0.." +
                        std::to_string(backbone.text_spec.layer_count));
    }

    DeepPromptSchedule schedule;
    schedule.tokens_per_layer = tokens_per_layer;
    if (tokens_per_layer == 0) return schedule;

    Rng root(seed);
    for (int h = 1; h <= depth; ++h) {
        schedule.designated_layers.push_back(h);
        schedule.tokens.emplace_back(
            "deep_prompt.layer" + std::to_string(h),
            gaussian(root.split("deep_prompt/layer-" + std::to_string(h)), tokens_per_layer,
                     backbone.text_spec.token_dim, 0.02));
    }
    return schedule;
}

ad::Var encode_anchor_set_var(ad::Tape& tape, PromptBank& bank, DeepPromptSchedule& schedule,
                              const Backbone& backbone,
                              const std::optional<std::string>& object_name) {
    if (bank.K() < 1) throw DataError("encode_anchor_set: no artifact classes");
    if (bank.learnable_clean.value.cols() != backbone.text_spec.token_dim) {
        throw DataError("encode_anchor_set: prompt token dim does not match backbone");
    }

    const std::string cls_text =
        instantiate_template(bank.cls_template, object_name.value_or("object"));
    std::optional<ad::Var> cls_embed;
    if (bank.cls_enabled) {
        cls_embed = tape.constant(backbone.embed_tokens(backbone.tokenize(cls_text)));
    }

    std::map<int, ad::Var> injections;
    for (std::size_t i = 0; i < schedule.designated_layers.size(); ++i) {
        injections[schedule.designated_layers[i]] = tape.leaf(schedule.tokens[i]);
    }

    // Ablations can empty the learnable or template segment; only the
    // populated parts enter the sequence.
    auto sequence = [&](ad::Parameter& learnable,
                        const std::optional<ad::Var>& artifact_embed) {
        std::vector<ad::Var> parts;
        if (bank.learnable_enabled && learnable.value.rows() > 0) {
            parts.push_back(tape.leaf(learnable));
        }
        if (cls_embed) parts.push_back(*cls_embed);
        if (artifact_embed) parts.push_back(*artifact_embed);
        if (parts.empty()) throw DataError("encode_anchor_set: empty prompt sequence");
        return parts.size() == 1 ? parts[0] : tape.vcat(parts);
    };

    std::vector<ad::Var> rows;
    rows.push_back(backbone.encode_text_with_injections(
        tape, sequence(bank.learnable_clean, std::nullopt), injections));
    for (int k = 0; k < bank.K(); ++k) {
        ad::Var artifact_embed = tape.constant(
            backbone.embed_tokens(backbone.tokenize(bank.artifact_names[static_cast<std::size_t>(k)])));
        rows.push_back(backbone.encode_text_with_injections(
            tape, sequence(bank.learnable_artifact[static_cast<std::size_t>(k)], artifact_embed),
            injections));
    }
    return tape.l2_normalize_rows(tape.vcat(rows));
}

AnchorSet encode_anchor_set(PromptBank& bank, DeepPromptSchedule& schedule,
                            const Backbone& backbone,
                            const std::optional<std::string>& object_name) {
    ad::Tape tape;
    AnchorSet out;
    out.anchors = encode_anchor_set_var(tape, bank, schedule, backbone, object_name).val();
    return out;
}

AnchorSeparationStats anchor_separation_report(const AnchorSet& before, const AnchorSet& after) {
    if (before.K() != after.K()) {
        throw DataError("anchor_separation_report: anchor sets have different K");
    }
    const int k = before.K();
    if (k < 1) throw DataError("anchor_separation_report: no artifact anchors");

    auto unit_rows = [](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out = m;
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const double n = out.row(i).norm();
            if (n > 0.0) out.row(i) /= n;
        }
        return out;
    };
    const Eigen::MatrixXd b = unit_rows(before.anchors);
    const Eigen::MatrixXd a = unit_rows(after.anchors);

    AnchorSeparationStats stats;
    stats.artifact_pairwise_before = Eigen::MatrixXd(k, k);
    stats.artifact_pairwise_after = Eigen::MatrixXd(k, k);
    double sum_b = 0.0;
    double sum_a = 0.0;
    for (int i = 1; i <= k; ++i) {
        sum_b += b.row(0).dot(b.row(i));
        sum_a += a.row(0).dot(a.row(i));
        for (int j = 1; j <= k; ++j) {
            stats.artifact_pairwise_before(i - 1, j - 1) = b.row(i).dot(b.row(j));
            stats.artifact_pairwise_after(i - 1, j - 1) = a.row(i).dot(a.row(j));
        }
    }
    stats.clean_vs_artifact_mean_before = sum_b / k;
    stats.clean_vs_artifact_mean_after = sum_a / k;
    return stats;
}

} // namespace pad
