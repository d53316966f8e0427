#include "pad/config.hpp"

#include "pad/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace pad {

using nlohmann::json;

void RunConfig::validate() const {
    if (input_size < 1) throw DataError("config: input_size must be >= 1");
    if (batch_size < 1) throw DataError("config: batch_size must be >= 1");
    if (artifact_names.empty()) throw DataError("config: need at least one artifact class");
    class_table(); // throws on duplicates / reserved names
    if (beta < 0.0 || beta > 1.0) throw DataError("config: beta outside [0,1]");
    if (adapter_layers < 0) throw DataError("config: adapter_layers must be >= 0");
    if (taps.empty()) throw DataError("config: taps must be nonempty");
    if (!std::is_sorted(taps.begin(), taps.end()) ||
        std::adjacent_find(taps.begin(), taps.end()) != taps.end()) {
        throw DataError("config: taps must be strictly ascending");
    }
    if (taps.front() < 1) throw DataError("config: taps are 1-based");
    if (prompt_length < 1) throw DataError("config: prompt_length must be >= 1");
    if (!use_learnable_prompts && !use_cls_tokens) {
        throw DataError("config: the clean prompt sequence would be empty "
                        "(use_learnable_prompts and use_cls_tokens both disabled)");
    }
    if (deep_prompt_tokens < 0) throw DataError("config: deep_prompt_tokens must be >= 0");
    if (deep_prompt_depth < 0) throw DataError("config: deep_prompt_depth must be >= 0");
    if (temperature <= 0.0) throw DataError("config: temperature must be > 0");
    if (lambda < 0.0) throw DataError("config: lambda must be >= 0");
    if (focal_gamma < 0.0) throw DataError("config: focal_gamma must be >= 0");
    if (focal_alpha <= 0.0) throw DataError("config: focal_alpha must be > 0");
    if (dice_epsilon < 0.0) throw DataError("config: dice_epsilon must be >= 0");
    if (learning_rate <= 0.0) throw DataError("config: learning_rate must be > 0");
    if (epochs_stage1 < 0 || epochs_stage2 < 0 || epochs_stage3 < 0) {
        throw DataError("config: epochs must be >= 0");
    }
    if (grad_clip <= 0.0) throw DataError("config: grad_clip must be > 0");
    if (stages.empty()) throw DataError("config: stages must be nonempty");
    const std::set<std::string> known_stages{"I", "II", "III"};
    for (const auto& s : stages) {
        if (!known_stages.count(s)) throw DataError("config: unknown stage \"" + s + "\"");
    }
    if (!(tau_support > 0.0 && tau_support < 1.0)) {
        throw DataError("config: tau_support must lie in (0,1)");
    }
    if (jitter_frac < 0.0 || jitter_frac > 1.0) throw DataError("config: jitter_frac outside [0,1]");
    if (!(fpr_cap > 0.0 && fpr_cap <= 1.0)) throw DataError("config: fpr_cap outside (0,1]");
    if (backbone == "toy") {
        if (input_size % toy.patch_size != 0) {
            throw DataError("config: input_size not divisible by toy patch_size");
        }
        const int max_tap = taps.back();
        if (max_tap > toy.vision_layers) {
            throw DataError("config: tap " + std::to_string(max_tap) + " beyond toy layer count " +
                            std::to_string(toy.vision_layers));
        }
        if (adapter_layers > toy.vision_layers) {
            throw DataError("config: adapter_layers beyond toy layer count");
        }
        if (deep_prompt_depth > toy.text_layers) {
            throw DataError("config: deep_prompt_depth beyond toy text layer count");
        }
    }
}

namespace {

json to_json(const RunConfig& c) {
    json j;
    j["input_size"] = c.input_size;
    j["batch_size"] = c.batch_size;
    j["artifact_names"] = c.artifact_names;
    j["backbone"] = c.backbone;
    j["toy"] = {{"vision_layers", c.toy.vision_layers},
                {"token_dim", c.toy.token_dim},
                {"embed_dim", c.toy.embed_dim},
                {"patch_size", c.toy.patch_size},
                {"vision_heads", c.toy.vision_heads},
                {"text_layers", c.toy.text_layers},
                {"text_token_dim", c.toy.text_token_dim},
                {"text_heads", c.toy.text_heads},
                {"max_sequence", c.toy.max_sequence},
                {"vocab_size", c.toy.vocab_size}};
    j["beta"] = c.beta;
    j["adapter_layers"] = c.adapter_layers;
    j["taps"] = c.taps;
    j["prompt_length"] = c.prompt_length;
    j["deep_prompt_tokens"] = c.deep_prompt_tokens;
    j["deep_prompt_depth"] = c.deep_prompt_depth;
    j["cls_template"] = c.cls_template;
    j["use_learnable_prompts"] = c.use_learnable_prompts;
    j["use_cls_tokens"] = c.use_cls_tokens;
    j["temperature"] = c.temperature;
    j["lambda"] = c.lambda;
    j["focal_gamma"] = c.focal_gamma;
    j["focal_alpha"] = c.focal_alpha;
    j["dice_epsilon"] = c.dice_epsilon;
    j["learning_rate"] = c.learning_rate;
    j["epochs_stage1"] = c.epochs_stage1;
    j["epochs_stage2"] = c.epochs_stage2;
    j["epochs_stage3"] = c.epochs_stage3;
    j["grad_clip"] = c.grad_clip;
    j["stages"] = c.stages;
    j["tau_support"] = c.tau_support;
    j["jitter_frac"] = c.jitter_frac;
    j["fpr_cap"] = c.fpr_cap;
    j["seed"] = c.seed;
    return j;
}

RunConfig from_json(const json& j) {
    RunConfig c;
    std::set<std::string> known{
        "input_size",    "batch_size",    "artifact_names", "backbone",
        "toy",           "beta",          "adapter_layers", "taps",
        "prompt_length", "deep_prompt_tokens", "deep_prompt_depth", "cls_template",
        "temperature",   "lambda",        "focal_gamma",    "focal_alpha",
        "dice_epsilon",  "learning_rate", "epochs_stage1",  "epochs_stage2",
        "epochs_stage3", "grad_clip",     "stages",         "tau_support",
        "jitter_frac",   "fpr_cap",       "seed",           "K",
        "use_learnable_prompts", "use_cls_tokens"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw DataError("config: unknown key \"" + key + "\"");
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("input_size", c.input_size);
    get("batch_size", c.batch_size);
    get("artifact_names", c.artifact_names);
    get("backbone", c.backbone);
    if (j.contains("toy")) {
        const auto& t = j.at("toy");
        std::set<std::string> known_toy{"vision_layers", "token_dim",  "embed_dim",
                                        "patch_size",    "vision_heads", "text_layers",
                                        "text_token_dim", "text_heads", "max_sequence",
                                        "vocab_size"};
        for (const auto& [key, _] : t.items()) {
            if (!known_toy.count(key)) throw DataError("config: unknown toy key \"" + key + "\"");
        }
        auto tg = [&](const char* key, auto& field) {
            if (t.contains(key)) field = t.at(key).get<std::decay_t<decltype(field)>>();
        };
        tg("vision_layers", c.toy.vision_layers);
        tg("token_dim", c.toy.token_dim);
        tg("embed_dim", c.toy.embed_dim);
        tg("patch_size", c.toy.patch_size);
        tg("vision_heads", c.toy.vision_heads);
        tg("text_layers", c.toy.text_layers);
        tg("text_token_dim", c.toy.text_token_dim);
        tg("text_heads", c.toy.text_heads);
        tg("max_sequence", c.toy.max_sequence);
        tg("vocab_size", c.toy.vocab_size);
    }
    get("beta", c.beta);
    get("adapter_layers", c.adapter_layers);
    get("taps", c.taps);
    get("prompt_length", c.prompt_length);
    get("deep_prompt_tokens", c.deep_prompt_tokens);
    get("deep_prompt_depth", c.deep_prompt_depth);
    get("cls_template", c.cls_template);
    get("use_learnable_prompts", c.use_learnable_prompts);
    get("use_cls_tokens", c.use_cls_tokens);
    get("temperature", c.temperature);
    get("lambda", c.lambda);
    get("focal_gamma", c.focal_gamma);
    get("focal_alpha", c.focal_alpha);
    get("dice_epsilon", c.dice_epsilon);
    get("learning_rate", c.learning_rate);
    get("epochs_stage1", c.epochs_stage1);
    get("epochs_stage2", c.epochs_stage2);
    get("epochs_stage3", c.epochs_stage3);
    get("grad_clip", c.grad_clip);
    get("stages", c.stages);
    get("tau_support", c.tau_support);
    get("jitter_frac", c.jitter_frac);
    get("fpr_cap", c.fpr_cap);
    get("seed", c.seed);
    if (j.contains("K") && j.at("K").get<int>() != c.K()) {
        throw DataError("config: K does not match artifact_names length");
    }

    // The toy pair always follows the run geometry and root seed.
    c.toy.input_size = c.input_size;
    c.toy.seed = c.seed;
    c.validate();
    return c;
}

} // namespace

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("load_config: " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_config: cannot write " + path.string());
    out << to_json(config).dump(2) << '\n';
}

std::string config_to_json_string(const RunConfig& config) { return to_json(config).dump(2); }

RunConfig config_from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config parse: ") + e.what());
    }
    return from_json(j);
}

} // namespace pad
