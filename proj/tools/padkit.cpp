#include "pad/compositor.hpp"
#include "pad/config.hpp"
#include "pad/errors.hpp"
#include "pad/image_io.hpp"
#include "pad/manifest.hpp"
#include "pad/model.hpp"
#include "pad/report.hpp"
#include "pad/rng.hpp"
#include "pad/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

pad::RunConfig resolve_config(const GlobalOpts& g) {
    pad::RunConfig config;
    if (!g.config_path.empty()) config = pad::load_config(g.config_path);
    if (g.seed) config.seed = *g.seed;
    config.validate();
    return config;
}

void note(const GlobalOpts& g, const std::string& msg) {
    if (g.verbose) std::cerr << "padkit: " << msg << '\n';
}

void write_config_snapshot(const pad::RunConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    pad::save_config(config, dir / "config.json");
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw pad::DataError("not a directory: " + dir.string());
    }
    std::set<fs::path> sorted;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") sorted.insert(entry.path());
    }
    return {sorted.begin(), sorted.end()};
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
    std::string clean_dir, patterns, anchors, out_manifest;
    int per_class_count = 10;
    std::string split_ratios; // "train,val,test"
};

int run_synth(const GlobalOpts& g, const SynthOpts& o) {
    const pad::RunConfig config = resolve_config(g);
    const pad::ClassTable table = config.class_table();
    const pad::PatternBank bank = pad::load_pattern_bank(o.patterns, table);

    const auto clean_paths = list_images(o.clean_dir);
    if (clean_paths.empty()) {
        throw pad::DataError("synth: no images in " + o.clean_dir);
    }

    const fs::path manifest_path = o.out_manifest;
    const fs::path base = manifest_path.parent_path().empty() ? fs::path(".")
                                                              : manifest_path.parent_path();
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");

    pad::DatasetManifest manifest;
    manifest.class_table = table;
    manifest.base_dir = base;

    struct CleanEntry {
        pad::Sample sample;
        pad::Mask anchor;
    };
    std::vector<CleanEntry> cleans;
    for (const auto& path : clean_paths) {
        const fs::path anchor_path = fs::path(o.anchors) / (path.stem().string() + ".png");
        if (!fs::exists(anchor_path)) {
            throw pad::DataError("synth: missing anchor mask " + anchor_path.string());
        }
        CleanEntry e;
        e.sample.image = pad::load_image(path);
        e.sample.image_path = "images/" + path.filename().string();
        e.sample.id = pad::sample_id_for_path(e.sample.image_path);
        e.sample.class_id = 0;
        e.sample.origin = pad::Origin::clean;
        e.sample.mask = pad::Mask::Zero(e.sample.image.height, e.sample.image.width);
        e.anchor = pad::load_mask(anchor_path);
        if (e.anchor.rows() != e.sample.image.height || e.anchor.cols() != e.sample.image.width) {
            throw pad::DataError("synth: anchor mask shape differs from image for " +
                                 path.filename().string());
        }
        pad::save_image_png(e.sample.image, base / e.sample.image_path);
        cleans.push_back(std::move(e));
    }

    const pad::Rng root = pad::Rng(config.seed).split("synth");
    int synthesized = 0;
    std::vector<pad::Sample> out_samples;
    for (const auto& e : cleans) out_samples.push_back(e.sample);

    for (const auto& cls : table.classes) {
        if (cls.id == 0) continue;
        if (bank.for_class(cls.id).empty()) {
            note(g, "no patterns for class '" + cls.name + "', skipping synthesis");
            continue;
        }
        for (int i = 0; i < o.per_class_count; ++i) {
            const CleanEntry& e = cleans[static_cast<std::size_t>(i) % cleans.size()];
            pad::Rng rng = root.split(cls.name + "/" + std::to_string(i));
            pad::Sample s = pad::synthesize_sample(e.sample, bank, cls.id, e.anchor, rng,
                                                   config.jitter_frac);
            const std::string stem =
                fs::path(e.sample.image_path).stem().string() + "-" + cls.name + "-" +
                std::to_string(i);
            s.image_path = "images/" + stem + ".png";
            s.mask_path = "masks/" + stem + ".png";
            s.id = pad::sample_id_for_path(s.image_path);
            pad::save_image_png(s.image, base / s.image_path);
            pad::save_mask_png(s.mask, base / s.mask_path);
            out_samples.push_back(std::move(s));
            ++synthesized;
        }
    }

    manifest.samples = std::move(out_samples);
    for (const auto& s : manifest.samples) {
        manifest.split_assignments[s.id] = pad::Split::train;
    }
    if (!o.split_ratios.empty()) {
        std::array<double, 3> ratios{};
        std::stringstream ss(o.split_ratios);
        std::string part;
        int idx = 0;
        while (std::getline(ss, part, ',') && idx < 3) ratios[static_cast<std::size_t>(idx++)] = std::stod(part);
        if (idx != 3) throw pad::DataError("synth: --split-ratios needs three comma-separated values");
        manifest = pad::split_dataset(std::move(manifest), ratios, config.seed);
    }

    pad::save_manifest(manifest, manifest_path);
    write_config_snapshot(config, base);
    std::cout << "wrote " << manifest.samples.size() << " samples (" << synthesized
              << " synthetic) to " << manifest_path.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
    std::string manifest, out, stages, resume;
};

int run_train(const GlobalOpts& g, const TrainOpts& o) {
    pad::Model model = [&] {
        if (!o.resume.empty()) {
            note(g, "resuming from " + o.resume);
            std::optional<int> expected;
            if (!g.config_path.empty()) expected = resolve_config(g).K();
            return pad::load_checkpoint(o.resume, expected);
        }
        return pad::Model::create(resolve_config(g));
    }();
    if (!o.stages.empty()) {
        std::vector<std::string> stages;
        std::stringstream ss(o.stages);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) stages.push_back(part);
        }
        model.config.stages = stages;
        model.config.validate();
    }

    const pad::DatasetManifest manifest =
        pad::load_manifest(o.manifest, model.config.class_table());

    const fs::path out = o.out;
    write_config_snapshot(model.config, out);
    pad::TrainResult result = pad::train_full(model, manifest, out);

    std::ofstream log(out / "train_log.jsonl");
    if (!log) throw pad::DataError("train: cannot write " + (out / "train_log.jsonl").string());
    for (const auto& entry : result.log) {
        json rec;
        rec["stage"] = entry.stage;
        rec["epoch"] = entry.epoch;
        rec["step"] = entry.step;
        rec["split"] = entry.val ? "val" : "train";
        rec["cls"] = entry.loss.cls;
        rec["dice"] = entry.loss.dice;
        rec["focal"] = entry.loss.focal;
        rec["total"] = entry.loss.total;
        log << rec.dump() << '\n';
    }
    if (!result.log.empty()) {
        std::cout << "final train loss " << result.log.back().loss.total << '\n';
    }
    std::cout << "checkpoint: " << result.final_checkpoint.string() << '\n';
    return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalOpts {
    std::string checkpoint, manifest, split = "test", out;
    double fpr_cap = -1.0; // <0: take the checkpoint config's value
    bool generalization = false;
};

int run_eval(const GlobalOpts& g, const EvalOpts& o) {
    std::optional<int> expected;
    if (!g.config_path.empty()) expected = resolve_config(g).K();
    pad::Model model = pad::load_checkpoint(o.checkpoint, expected);

    const pad::DatasetManifest manifest =
        pad::load_manifest(o.manifest, model.config.class_table());
    const auto samples = manifest.split(pad::split_from_string(o.split));
    if (samples.empty()) {
        throw pad::DataError("eval: split '" + o.split + "' is empty");
    }
    const double fpr_cap = o.fpr_cap > 0.0 ? o.fpr_cap : model.config.fpr_cap;

    const auto predict = model.predictor();
    const pad::MetricReport report =
        pad::evaluate(predict, samples, manifest.class_table, fpr_cap);
    std::cout << pad::render_metric_table(report);

    json out_doc;
    out_doc["format"] = "pad-eval-v1";
    out_doc["config"] = json::parse(pad::config_to_json_string(model.config));
    out_doc["report"] = json::parse(pad::report_to_json(report));

    if (o.generalization) {
        std::vector<const pad::Sample*> synth_set, real_set;
        for (const pad::Sample* s : samples) {
            if (s->class_id == 0) continue;
            (s->origin == pad::Origin::synthetic ? synth_set : real_set).push_back(s);
        }
        // Each subset keeps every clean sample so one-vs-rest stays defined.
        for (const pad::Sample* s : samples) {
            if (s->class_id == 0) {
                synth_set.push_back(s);
                real_set.push_back(s);
            }
        }
        const pad::GeneralizationReport gen =
            pad::generalization_split_eval(predict, synth_set, real_set, manifest.class_table,
                                           fpr_cap);
        std::cout << '\n' << pad::render_generalization(gen);
        out_doc["generalization"] = {
            {"synthetic", json::parse(pad::report_to_json(gen.synthetic))},
            {"real", json::parse(pad::report_to_json(gen.real))}};
    }

    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw pad::DataError("eval: cannot write " + o.out);
        f << out_doc.dump(2) << '\n';
        note(g, "wrote " + o.out);
    }
    return 0;
}

// -------------------------------------------------------------- predict ----

struct PredictOpts {
    std::string checkpoint, out;
    std::vector<std::string> images;
};

int run_predict(const GlobalOpts& g, const PredictOpts& o) {
    std::optional<int> expected;
    if (!g.config_path.empty()) expected = resolve_config(g).K();
    pad::Model model = pad::load_checkpoint(o.checkpoint, expected);
    const pad::ClassTable table = model.config.class_table();
    const double threshold = model.mask_threshold.value_or(0.5);
    if (!model.mask_threshold) {
        note(g, "checkpoint holds no mask threshold; using 0.5");
    }

    const fs::path out = o.out;
    fs::create_directories(out);
    write_config_snapshot(model.config, out);

    std::ofstream records(out / "predictions.jsonl");
    if (!records) {
        throw pad::DataError("predict: cannot write " + (out / "predictions.jsonl").string());
    }

    for (const auto& image_path : o.images) {
        const pad::Image image = pad::load_image(image_path);
        const pad::Predictions pred =
            model.predict_image(image, image.height, image.width);
        const int label = pred.predicted_class();
        const std::string stem = fs::path(image_path).stem().string();

        const fs::path anomaly_file = out / (stem + ".anomaly.png");
        pad::save_gray_png(pred.anomaly_map, anomaly_file);

        const fs::path mask_file = out / (stem + ".mask.png");
        pad::Mask mask = (pred.anomaly_map.array() >= threshold).cast<double>();
        pad::save_mask_png(mask, mask_file);

        json rec;
        rec["image"] = image_path;
        rec["class"] = table.by_id(label).name;
        json probs = json::object();
        for (const auto& cls : table.classes) {
            probs[cls.name] = pred.class_probs(cls.id);
        }
        rec["probs"] = probs;
        rec["anomaly_map"] = anomaly_file.string();
        rec["mask"] = mask_file.string();

        // Per-class masks: pixels whose argmax lands on that artifact class.
        json class_masks = json::object();
        for (const auto& cls : table.classes) {
            if (cls.id == 0) continue;
            pad::Mask m = pad::Mask::Zero(pred.anomaly_map.rows(), pred.anomaly_map.cols());
            for (int r = 0; r < m.rows(); ++r) {
                for (int c = 0; c < m.cols(); ++c) {
                    int best = 0;
                    for (std::size_t k = 1; k < pred.pixel_probs.size(); ++k) {
                        if (pred.pixel_probs[k](r, c) >
                            pred.pixel_probs[static_cast<std::size_t>(best)](r, c)) {
                            best = static_cast<int>(k);
                        }
                    }
                    if (best == cls.id) m(r, c) = 1.0;
                }
            }
            const fs::path class_file = out / (stem + ".mask-" + cls.name + ".png");
            pad::save_mask_png(m, class_file);
            class_masks[cls.name] = class_file.string();
        }
        rec["class_masks"] = class_masks;
        records << rec.dump() << '\n';

        std::cout << image_path << " class=" << table.by_id(label).name
                  << " p=" << pred.class_probs(label) << '\n';
    }
    return 0;
}

// --------------------------------------------------------------- report ----

struct ReportOpts {
    std::string eval_json, checkpoint;
};

int run_report(const GlobalOpts& g, const ReportOpts& o) {
    (void)g;
    std::ifstream f(o.eval_json);
    if (!f) throw pad::DataError("report: cannot open " + o.eval_json);
    std::stringstream buf;
    buf << f.rdbuf();

    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw pad::DataError("report: invalid JSON: " + std::string(e.what()));
    }
    // Accept both the eval wrapper and a bare report document.
    const json& report_doc = doc.contains("report") ? doc.at("report") : doc;
    const pad::MetricReport report = pad::report_from_json(report_doc.dump());
    std::cout << pad::render_metric_table(report);

    if (doc.contains("generalization")) {
        pad::GeneralizationReport gen;
        gen.synthetic =
            pad::report_from_json(doc.at("generalization").at("synthetic").dump());
        gen.real = pad::report_from_json(doc.at("generalization").at("real").dump());
        std::cout << '\n' << pad::render_generalization(gen);
    }

    if (!o.checkpoint.empty()) {
        pad::Model trained = pad::load_checkpoint(o.checkpoint);
        // Same config and seed reproduce the pre-training prompt state.
        pad::Model fresh = pad::Model::create(trained.config);
        const pad::AnchorSet before = fresh.current_anchors();
        const pad::AnchorSet after = trained.current_anchors();
        std::cout << '\n'
                  << pad::render_anchor_stats(pad::anchor_separation_report(before, after));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"perceptual-artifact detection toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
    app.add_flag("--verbose", g.verbose, "chattier stderr");

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "compose synthetic artifact samples");
    synth_cmd->add_option("--clean-dir", synth.clean_dir, "directory of clean images")
        ->required();
    synth_cmd->add_option("--patterns", synth.patterns, "pattern bank directory")->required();
    synth_cmd->add_option("--anchors", synth.anchors, "anchor mask directory")->required();
    synth_cmd->add_option("--out-manifest", synth.out_manifest, "manifest path to write")
        ->required();
    synth_cmd->add_option("--per-class-count", synth.per_class_count,
                          "synthetic samples per artifact class");
    synth_cmd->add_option("--split-ratios", synth.split_ratios,
                          "train,val,test ratios (default: everything train)");

    TrainOpts train;
    auto* train_cmd = app.add_subcommand("train", "run the staged training schedule");
    train_cmd->add_option("--manifest", train.manifest, "dataset manifest")->required();
    train_cmd->add_option("--out", train.out, "output directory")->required();
    train_cmd->add_option("--stages", train.stages, "comma list overriding config stages");
    train_cmd->add_option("--resume", train.resume, "checkpoint directory to resume from");

    EvalOpts eval;
    auto* eval_cmd = app.add_subcommand("eval", "run the seven-metric battery");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint directory")->required();
    eval_cmd->add_option("--manifest", eval.manifest, "dataset manifest")->required();
    eval_cmd->add_option("--split", eval.split, "train|val|test (default test)");
    eval_cmd->add_option("--fpr-cap", eval.fpr_cap, "AUPRO false-positive-rate cap");
    eval_cmd->add_option("--out", eval.out, "report JSON path");
    eval_cmd->add_flag("--generalization", eval.generalization,
                       "also evaluate synthetic vs real subsets side by side");

    PredictOpts predict;
    auto* predict_cmd = app.add_subcommand("predict", "classify images and emit masks");
    predict_cmd->add_option("--checkpoint", predict.checkpoint, "checkpoint directory")
        ->required();
    predict_cmd->add_option("--out", predict.out, "output directory")->required();
    predict_cmd->add_option("images", predict.images, "image files")->required();

    ReportOpts report;
    auto* report_cmd = app.add_subcommand("report", "render tables from an eval JSON");
    report_cmd->add_option("--eval", report.eval_json, "eval/report JSON file")->required();
    report_cmd->add_option("--checkpoint", report.checkpoint,
                           "checkpoint for anchor separation stats");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (synth_cmd->parsed()) return run_synth(g, synth);
        if (train_cmd->parsed()) return run_train(g, train);
        if (eval_cmd->parsed()) return run_eval(g, eval);
        if (predict_cmd->parsed()) return run_predict(g, predict);
        if (report_cmd->parsed()) return run_report(g, report);
        std::cerr << "padkit: no subcommand selected\n";
        return 1;
    } catch (const pad::NumericError& e) {
        std::cerr << "padkit: numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const pad::DataError& e) {
        std::cerr << "padkit: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "padkit: " << e.what() << '\n';
        return 2;
    }
}
