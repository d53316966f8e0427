#include "pad/trainer.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

using nlohmann::json;

namespace pad {

std::string to_string(Stage s) {
    switch (s) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
    }
    throw DataError("unknown stage");
}

Stage stage_from_string(const std::string& s) {
    if (s == "I") return Stage::I;
    if (s == "II") return Stage::II;
    if (s == "III") return Stage::III;
    throw DataError("unknown stage '" + s + "' (expected I, II or III)");
}

std::vector<std::string> trainable_parameters(Stage stage) {
    switch (stage) {
    case Stage::I:
        return {"vision_adapters", "projectors", "cls_head", "seg_head"};
    case Stage::II:
        return {"prompt_embeddings", "deep_prompt_tokens"};
    case Stage::III:
        return {"vision_adapters", "projectors"};
    }
    throw DataError("unknown stage");
}

StageConfig StageConfig::from_run_config(const RunConfig& config, Stage stage) {
    StageConfig sc;
    sc.stage = stage;
    switch (stage) {
    case Stage::I: sc.epochs = config.epochs_stage1; break;
    case Stage::II: sc.epochs = config.epochs_stage2; break;
    case Stage::III: sc.epochs = config.epochs_stage3; break;
    }
    sc.learning_rate = config.learning_rate;
    sc.batch_size = config.batch_size;
    sc.trainable_groups = trainable_parameters(stage);
    sc.grad_clip = config.grad_clip;
    return sc;
}

void StageConfig::validate() const {
    if (epochs < 0) throw DataError("stage config: epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw DataError("stage config: learning rate must be positive");
    if (batch_size < 1) throw DataError("stage config: batch size must be >= 1");
    if (grad_clip < 0.0) throw DataError("stage config: grad clip must be >= 0");
    auto expected = trainable_parameters(stage);
    auto got = trainable_groups;
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    if (expected != got) {
        throw DataError("stage config: trainable groups do not match stage " + to_string(stage));
    }
}

Adam::Adam(std::vector<ad::Parameter*> params, double learning_rate, double grad_clip,
           double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), clip_(grad_clip), beta1_(beta1),
      beta2_(beta2), eps_(epsilon) {
    slots_.reserve(params_.size());
    for (const ad::Parameter* p : params_) {
        slots_.push_back({Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()),
                          Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols())});
    }
}

void Adam::step() {
    double sq_norm = 0.0;
    for (const ad::Parameter* p : params_) sq_norm += p->grad.squaredNorm();
    const double norm = std::sqrt(sq_norm);
    if (!std::isfinite(norm)) {
        throw NumericError("adam: non-finite gradient norm");
    }
    const double scale = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ad::Parameter& p = *params_[i];
        const Eigen::MatrixXd g = p.grad * scale;
        slots_[i].m = beta1_ * slots_[i].m + (1.0 - beta1_) * g;
        slots_[i].v = beta2_ * slots_[i].v + (1.0 - beta2_) * g.cwiseProduct(g);
        const Eigen::MatrixXd m_hat = slots_[i].m / bc1;
        const Eigen::MatrixXd v_hat = slots_[i].v / bc2;
        p.value.noalias() -=
            lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
    }
}

namespace {

struct PreparedSample {
    Image image; // backbone input size
    Mask mask;   // same size, binary
    int class_id = 0;
    std::optional<std::string> object_name;
};

PreparedSample prepare(const Sample& s, int input_size) {
    PreparedSample p;
    p.class_id = s.class_id;
    p.object_name = s.object_name;
    if (s.image.height == input_size && s.image.width == input_size) {
        p.image = s.image;
        p.mask = s.mask;
    } else {
        p.image = resize_bilinear(s.image, input_size, input_size);
        p.mask = resize_mask(s.mask, input_size, input_size);
    }
    return p;
}

struct BatchLoss {
    ad::Var total; // 1x1, batch mean
    LossBreakdown values;
};

// Builds the stage's loss for one batch on a single tape. Stage I routes
// through the linear heads; II re-encodes anchors from the live prompt state
// so gradients reach the text side; III scores against the frozen cache.
BatchLoss batch_loss(Model& model, ad::Tape& tape,
                     const std::vector<const PreparedSample*>& batch, Stage stage) {
    const RunConfig& cfg = model.config;
    const int input_size = model.backbone.vision_spec.input_size;

    std::optional<ad::Var> cached_anchor_var;
    if (stage == Stage::III) {
        cached_anchor_var = tape.constant(model.cached_anchors->anchors);
    }

    ad::Var cls_sum, dice_sum, focal_sum;
    for (const PreparedSample* s : batch) {
        Model::VisionOut v = model.vision_forward(tape, s->image);

        ad::Var cls_probs, token_probs;
        if (stage == Stage::I) {
            cls_probs = tape.softmax_rows(classify_head(tape, v.global, model.heads));
            token_probs = tape.softmax_rows(segment_head(tape, v.f_mg, model.heads));
        } else {
            ad::Var anchors = stage == Stage::II
                                  ? encode_anchor_set_var(tape, model.prompts, model.schedule,
                                                          model.backbone, s->object_name)
                                  : *cached_anchor_var;
            cls_probs = cosine_softmax_var(tape, v.global, anchors, cfg.temperature, true);
            token_probs = cosine_softmax_var(tape, v.f_mg, anchors, cfg.temperature, false);
        }

        ad::Var cls = classification_loss_var(tape, cls_probs, s->class_id);

        auto planes = upsample_token_probs_var(tape, token_probs, v.grid_h, v.grid_w,
                                               input_size, input_size);
        // An artifact mask can vanish when downsized to the training
        // resolution; the pixel targets then fall back to all-clean while
        // the classification target keeps the true class.
        const bool mask_empty = (s->mask.array() != 0.0).count() == 0;
        const int seg_class = mask_empty ? 0 : s->class_id;
        auto [dice, focal] =
            segmentation_loss_var(tape, planes, s->mask, seg_class, cfg.focal_gamma,
                                  cfg.focal_alpha, cfg.dice_epsilon);

        cls_sum = cls_sum.valid() ? tape.add(cls_sum, cls) : cls;
        dice_sum = dice_sum.valid() ? tape.add(dice_sum, dice) : dice;
        focal_sum = focal_sum.valid() ? tape.add(focal_sum, focal) : focal;
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    ad::Var cls_mean = tape.scale(cls_sum, inv_n);
    ad::Var dice_mean = tape.scale(dice_sum, inv_n);
    ad::Var focal_mean = tape.scale(focal_sum, inv_n);

    BatchLoss out;
    out.total = tape.add(tape.add(tape.scale(cls_mean, cfg.lambda), dice_mean), focal_mean);
    out.values = total_loss(cls_mean.scalar(), dice_mean.scalar(), focal_mean.scalar(),
                            cfg.lambda);
    return out;
}

std::vector<int> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace

std::vector<StepLog> run_stage(Model& model, const StageConfig& stage_config,
                               const std::vector<const Sample*>& train,
                               const std::vector<const Sample*>& val) {
    stage_config.validate();
    if (train.empty()) throw DataError("run_stage: empty train split");
    if (stage_config.stage == Stage::III && !model.cached_anchors) {
        throw DataError("run_stage: Stage III requires the anchor cache from Stage II");
    }

    const int input_size = model.backbone.vision_spec.input_size;
    const int K = model.config.K();
    const std::string stage_name = to_string(stage_config.stage);

    std::vector<PreparedSample> train_prep, val_prep;
    train_prep.reserve(train.size());
    for (const Sample* s : train) train_prep.push_back(prepare(*s, input_size));
    val_prep.reserve(val.size());
    for (const Sample* s : val) val_prep.push_back(prepare(*s, input_size));

    // Per-class index pools for balanced batches.
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(K) + 1);
    for (std::size_t i = 0; i < train_prep.size(); ++i) {
        const int c = train_prep[i].class_id;
        if (c < 0 || c > K) throw DataError("run_stage: sample class outside the table");
        by_class[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    for (int c = 0; c <= K; ++c) {
        if (by_class[static_cast<std::size_t>(c)].empty()) {
            throw DataError("run_stage: class " + std::to_string(c) +
                            " has no training samples");
        }
    }

    auto groups = model.parameter_groups();
    std::vector<ad::Parameter*> trainable, all_params;
    for (const auto& [name, params] : groups) {
        all_params.insert(all_params.end(), params.begin(), params.end());
    }
    for (const std::string& g : stage_config.trainable_groups) {
        const auto& params = groups.at(g);
        trainable.insert(trainable.end(), params.begin(), params.end());
    }

    Adam optimizer(trainable, stage_config.learning_rate, stage_config.grad_clip);
    // The stage stream depends only on (seed, stage), never on earlier
    // stages' draws, so resuming at a stage boundary replays exactly.
    const Rng stage_rng = Rng(model.config.seed).split("stage-" + stage_name);

    std::vector<StepLog> log;
    const int batch_size = stage_config.batch_size;
    const int steps_per_epoch =
        static_cast<int>((train_prep.size() + batch_size - 1) / batch_size);

    for (int epoch = 0; epoch < stage_config.epochs; ++epoch) {
        const Rng epoch_rng = stage_rng.split("epoch-" + std::to_string(epoch));
        std::vector<std::vector<int>> order(by_class.size());
        for (int c = 0; c <= K; ++c) {
            Rng class_rng = epoch_rng.split("class-" + std::to_string(c));
            const auto& pool = by_class[static_cast<std::size_t>(c)];
            for (int pos : shuffled_indices(pool.size(), class_rng)) {
                order[static_cast<std::size_t>(c)].push_back(pool[static_cast<std::size_t>(pos)]);
            }
        }

        std::vector<std::size_t> cursor(by_class.size(), 0);
        int slot = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::vector<const PreparedSample*> batch;
            batch.reserve(static_cast<std::size_t>(batch_size));
            for (int b = 0; b < batch_size; ++b, ++slot) {
                const std::size_t c = static_cast<std::size_t>(slot % (K + 1));
                const auto& ord = order[c];
                batch.push_back(&train_prep[static_cast<std::size_t>(
                    ord[cursor[c] % ord.size()])]);
                ++cursor[c];
            }

            ad::Tape tape;
            BatchLoss loss = batch_loss(model, tape, batch, stage_config.stage);
            if (!std::isfinite(loss.values.total)) {
                throw NumericError("run_stage: non-finite loss at stage " + stage_name +
                                   " epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) + " (cls=" +
                                   std::to_string(loss.values.cls) + ", dice=" +
                                   std::to_string(loss.values.dice) + ", focal=" +
                                   std::to_string(loss.values.focal) + ")");
            }
            tape.backward(loss.total);
            optimizer.step();
            // Frozen groups accumulate gradients too (they sit on the path);
            // drop everything so no stage inherits stale state.
            for (ad::Parameter* p : all_params) p->zero_grad();

            log.push_back({stage_name, epoch, step, false, loss.values});
        }

        if (!val_prep.empty()) {
            // Forward-only validation pass, batched in manifest order.
            double cls = 0.0, dice = 0.0, focal = 0.0;
            std::size_t i = 0;
            while (i < val_prep.size()) {
                std::vector<const PreparedSample*> batch;
                for (std::size_t b = 0; b < static_cast<std::size_t>(batch_size) &&
                                        i < val_prep.size();
                     ++b, ++i) {
                    batch.push_back(&val_prep[i]);
                }
                ad::Tape tape;
                BatchLoss loss = batch_loss(model, tape, batch, stage_config.stage);
                const double w = static_cast<double>(batch.size());
                cls += loss.values.cls * w;
                dice += loss.values.dice * w;
                focal += loss.values.focal * w;
            }
            const double n = static_cast<double>(val_prep.size());
            log.push_back({stage_name, epoch, -1, true,
                           total_loss(cls / n, dice / n, focal / n, model.config.lambda)});
        }
    }
    return log;
}

TrainResult train_full(Model& model, const DatasetManifest& manifest,
                       const std::filesystem::path& out_dir) {
    const auto train = manifest.split(Split::train);
    const auto val = manifest.split(Split::val);
    if (train.empty()) throw DataError("train_full: manifest has no train split");
    {
        std::set<int> seen;
        for (const Sample* s : train) seen.insert(s->class_id);
        for (int k = 0; k <= model.config.K(); ++k) {
            if (!seen.count(k)) {
                throw DataError("train_full: class '" +
                                model.config.class_table().by_id(k).name +
                                "' missing from the train split");
            }
        }
    }

    TrainResult result;
    for (const std::string& name : model.config.stages) {
        const Stage stage = stage_from_string(name);
        const StageConfig sc = StageConfig::from_run_config(model.config, stage);
        auto stage_log = run_stage(model, sc, train, val);
        result.log.insert(result.log.end(), stage_log.begin(), stage_log.end());

        if (stage == Stage::II) {
            // Freeze the anchors: Stage III and all later inference score
            // against this snapshot of the prompt state.
            model.cached_anchors = encode_anchor_set(model.prompts, model.schedule,
                                                     model.backbone);
        }
        model.completed_stages.push_back(name);
        save_checkpoint(model, out_dir / ("stage-" + name));
    }

    // Pick the mask binarization threshold on validation pixels (train
    // pixels when no val split exists).
    {
        const auto& sweep = val.empty() ? train : val;
        std::vector<double> scores;
        std::vector<int> labels;
        for (const Sample* s : sweep) {
            const Predictions p = model.predict_sample(*s);
            for (int r = 0; r < p.anomaly_map.rows(); ++r) {
                for (int c = 0; c < p.anomaly_map.cols(); ++c) {
                    scores.push_back(p.anomaly_map(r, c));
                    labels.push_back(s->mask(r, c) != 0.0 ? 1 : 0);
                }
            }
        }
        if (std::count(labels.begin(), labels.end(), 1) > 0) {
            model.mask_threshold = f1_max(scores, labels).threshold;
        }
    }

    result.final_checkpoint = out_dir / "final";
    save_checkpoint(model, result.final_checkpoint);
    return result;
}

void save_checkpoint(Model& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw DataError("save_checkpoint: cannot write " + (dir / "params.bin").string());

    json tensors = json::array();
    std::uint64_t offset = 0;
    auto write_tensor = [&](const std::string& name, const Eigen::MatrixXd& m) {
        tensors.push_back(
            {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double v = m(i, j);
                bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
        }
        offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
    };

    for (const auto& [group, params] : model.parameter_groups()) {
        (void)group;
        for (const ad::Parameter* p : params) write_tensor(p->name, p->value);
    }
    if (model.cached_anchors) {
        write_tensor("cached_anchors", model.cached_anchors->anchors);
    }

    json meta;
    meta["format"] = "pad-checkpoint-v1";
    meta["config"] = json::parse(config_to_json_string(model.config));
    meta["completed_stages"] = model.completed_stages;
    if (model.mask_threshold) {
        meta["mask_threshold"] = *model.mask_threshold;
    } else {
        meta["mask_threshold"] = nullptr;
    }
    // Streams are re-derived per stage from (seed, stage label), so the
    // stage markers above are the entire resumable rng state.
    meta["rng"] = {{"scheme", "per-stage-rederive"}, {"root_seed", model.config.seed}};
    meta["tensors"] = tensors;

    if (model.config.backbone != "toy") {
        save_backbone(model.backbone, dir / "backbone");
        meta["embedded_backbone"] = true;
    } else {
        meta["embedded_backbone"] = false;
    }

    std::ofstream js(dir / "model.json");
    if (!js) throw DataError("save_checkpoint: cannot write " + (dir / "model.json").string());
    js << meta.dump(2) << '\n';
}

Model load_checkpoint(const std::filesystem::path& dir, std::optional<int> expected_K) {
    std::ifstream js(dir / "model.json");
    if (!js) throw DataError("load_checkpoint: missing " + (dir / "model.json").string());
    json meta;
    try {
        meta = json::parse(js);
    } catch (const json::exception& e) {
        throw DataError("load_checkpoint: corrupt metadata: " + std::string(e.what()));
    }
    if (!meta.contains("format") || meta["format"] != "pad-checkpoint-v1") {
        throw DataError("load_checkpoint: unknown checkpoint format");
    }

    RunConfig config;
    std::vector<std::string> completed;
    std::optional<double> mask_threshold;
    bool embedded = false;
    try {
        config = config_from_json_string(meta.at("config").dump());
        completed = meta.at("completed_stages").get<std::vector<std::string>>();
        if (!meta.at("mask_threshold").is_null()) {
            mask_threshold = meta.at("mask_threshold").get<double>();
        }
        embedded = meta.at("embedded_backbone").get<bool>();
    } catch (const json::exception& e) {
        throw DataError("load_checkpoint: corrupt metadata: " + std::string(e.what()));
    }
    if (expected_K && *expected_K != config.K()) {
        throw DataError("load_checkpoint: checkpoint has K=" + std::to_string(config.K()) +
                        ", expected K=" + std::to_string(*expected_K));
    }
    if (embedded) {
        config.backbone = (dir / "backbone").string();
    }

    Model model = Model::create(config);
    model.completed_stages = completed;
    model.mask_threshold = mask_threshold;

    std::map<std::string, ad::Parameter*> by_name;
    for (const auto& [group, params] : model.parameter_groups()) {
        (void)group;
        for (ad::Parameter* p : params) by_name[p->name] = p;
    }

    std::ifstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw DataError("load_checkpoint: missing " + (dir / "params.bin").string());

    std::set<std::string> filled;
    for (const auto& t : meta.at("tensors")) {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        std::uint64_t offset = 0;
        try {
            name = t.at("name").get<std::string>();
            rows = t.at("rows").get<Eigen::Index>();
            cols = t.at("cols").get<Eigen::Index>();
            offset = t.at("offset").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw DataError("load_checkpoint: corrupt tensor index: " + std::string(e.what()));
        }

        Eigen::MatrixXd m(rows, cols);
        bin.seekg(static_cast<std::streamoff>(offset));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                double v = 0.0;
                bin.read(reinterpret_cast<char*>(&v), sizeof(double));
                if (!bin) {
                    throw DataError("load_checkpoint: params.bin truncated at tensor '" +
                                    name + "'");
                }
                m(i, j) = v;
            }
        }

        if (name == "cached_anchors") {
            model.cached_anchors = AnchorSet{std::move(m)};
            continue;
        }
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw DataError("load_checkpoint: unknown tensor '" + name + "'");
        }
        if (it->second->value.rows() != rows || it->second->value.cols() != cols) {
            throw DataError("load_checkpoint: shape mismatch for tensor '" + name + "'");
        }
        it->second->value = std::move(m);
        it->second->zero_grad();
        filled.insert(name);
    }
    for (const auto& [name, p] : by_name) {
        (void)p;
        if (!filled.count(name)) {
            throw DataError("load_checkpoint: tensor '" + name + "' missing from checkpoint");
        }
    }
    return model;
}

} // namespace pad
