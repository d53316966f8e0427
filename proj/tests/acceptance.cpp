// Acceptance battery. Standalone binary: runs ten end-to-end property checks
// and prints one [PASS]/[FAIL] line per criterion. Exits nonzero if any fail.
//
// Oracles and fixtures are shared with the unit suite (helpers.hpp) so the
// brute-force reference implementations live in exactly one place.

#include "helpers.hpp"

#include "pad/adapters.hpp"
#include "pad/autodiff.hpp"
#include "pad/backbone.hpp"
#include "pad/compositor.hpp"
#include "pad/config.hpp"
#include "pad/image.hpp"
#include "pad/image_io.hpp"
#include "pad/manifest.hpp"
#include "pad/metrics.hpp"
#include "pad/model.hpp"
#include "pad/prompts.hpp"
#include "pad/rng.hpp"
#include "pad/scoring.hpp"
#include "pad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using Clock = std::chrono::steady_clock;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.array() == b.array()).all();
}

bool images_bit_equal(const pad::Image& a, const pad::Image& b) {
    if (!a.same_shape(b)) return false;
    for (int c = 0; c < 3; ++c) {
        if (!bit_equal(a.ch[c], b.ch[c])) return false;
    }
    return true;
}

bool predictions_bit_equal(const pad::Predictions& a, const pad::Predictions& b) {
    if (a.class_probs.size() != b.class_probs.size()) return false;
    if ((a.class_probs.array() != b.class_probs.array()).any()) return false;
    if (a.patch_probs.size() != b.patch_probs.size()) return false;
    if (a.pixel_probs.size() != b.pixel_probs.size()) return false;
    for (std::size_t k = 0; k < a.patch_probs.size(); ++k) {
        if (!bit_equal(a.patch_probs[k], b.patch_probs[k])) return false;
    }
    for (std::size_t k = 0; k < a.pixel_probs.size(); ++k) {
        if (!bit_equal(a.pixel_probs[k], b.pixel_probs[k])) return false;
    }
    return bit_equal(a.anomaly_map, b.anomaly_map);
}

std::map<std::string, std::uint64_t> all_checksums(pad::Model& model) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [name, params] : model.parameter_groups()) {
        (void)params;
        out[name] = model.group_checksum(name);
    }
    out["backbone"] = model.backbone.weight_checksum();
    return out;
}

/// In-memory dataset: `per_class` samples of every class (clean included).
/// Artifact masks are full quadrants aligned with the toy 2x2 patch grid and
/// each class blends its own flat color, so the set is cleanly memorizable.
pad::DatasetManifest toy_dataset(const pad::RunConfig& cfg, int per_class,
                                 std::uint64_t seed) {
    pad::DatasetManifest m;
    m.class_table = cfg.class_table();
    pad::Rng rng(seed);
    const int s = cfg.input_size;
    const double colors[3][3] = {
        {0.95, 0.10, 0.10}, {0.10, 0.95, 0.10}, {0.10, 0.10, 0.95}};
    int counter = 0;
    for (int k = 0; k <= m.class_table.K(); ++k) {
        for (int i = 0; i < per_class; ++i) {
            pad::Sample smp;
            smp.id = "s" + std::to_string(counter);
            smp.image_path = smp.id + ".png";
            smp.class_id = k;
            if (k == 0) {
                smp.origin = pad::Origin::clean;
                smp.image = testutil::random_image(s, s, rng);
                smp.mask = pad::Mask::Zero(s, s);
            } else {
                smp.origin = pad::Origin::synthetic;
                pad::CompositeSpec spec;
                spec.clean = testutil::random_image(s, s, rng);
                spec.pattern = pad::Image::constant(s, s, colors[k - 1][0],
                                                    colors[k - 1][1], colors[k - 1][2]);
                const int q = counter % 4;
                spec.mask = pad::Mask::Zero(s, s);
                spec.mask.block((q / 2) * (s / 2), (q % 2) * (s / 2), s / 2, s / 2)
                    .setOnes();
                spec.phi = 0.85;
                smp.image = pad::composite(spec);
                smp.mask = spec.mask;
                smp.phi = spec.phi;
            }
            m.split_assignments[smp.id] = pad::Split::train;
            m.samples.push_back(std::move(smp));
            ++counter;
        }
    }
    return m;
}

/// Trained-toy fixture shared by criteria 6 and 7.
struct ToyRun {
    pad::RunConfig cfg;
    pad::DatasetManifest data;
    std::optional<pad::Model> model;
    std::vector<pad::StepLog> log;
    testutil::TempDir dir;
};
std::optional<ToyRun> g_toy;

// ------------------------------------------------------------ criterion 1 --

void criterion_compositing() {
    const auto t0 = Clock::now();
    pad::Rng rng(101);
    for (int i = 0; i < 1000; ++i) {
        const int h = rng.uniform_int(4, 24);
        const int w = rng.uniform_int(4, 24);
        pad::CompositeSpec spec;
        spec.clean = testutil::random_image(h, w, rng);
        spec.pattern = testutil::random_image(h, w, rng);
        spec.mask = testutil::random_mask(h, w, rng, 0.4);
        spec.phi = rng.uniform(0.05, 0.95);
        const pad::Image out = pad::composite(spec);
        expect(out.height == h && out.width == w,
               "composite changed the frame shape at instance " + str(i));
        for (int c = 0; c < 3; ++c) {
            for (int r = 0; r < h; ++r) {
                for (int cc = 0; cc < w; ++cc) {
                    const double m = spec.mask(r, cc);
                    const double clean = spec.clean.ch[c](r, cc);
                    const double pattern = spec.pattern.ch[c](r, cc);
                    const double got = out.ch[c](r, cc);
                    // Independent pixelwise oracle of the blend equation.
                    const double want =
                        (1.0 - m) * clean + m * ((1.0 - spec.phi) * clean + spec.phi * pattern);
                    if (m == 0.0) {
                        if (got != clean) {
                            throw Failure("off-mask pixel not bit-equal to clean at instance " +
                                          str(i));
                        }
                    } else if (std::abs(got - want) > 1e-7) {
                        throw Failure("blend mismatch " + str(std::abs(got - want)) +
                                      " at instance " + str(i));
                    }
                }
            }
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 10.0, "runtime " + str(secs) + "s exceeds 10s");
}

// ------------------------------------------------------------ criterion 2 --

void criterion_metric_oracles() {
    const auto t0 = Clock::now();
    pad::Rng rng(202);
    // Scores on a coarse grid so ties occur constantly.
    auto draw_scores = [&](int n) {
        std::vector<double> s(static_cast<std::size_t>(n));
        for (auto& v : s) v = rng.uniform_int(0, 12) / 12.0;
        return s;
    };
    auto draw_labels = [&](int n) {
        std::vector<int> l(static_cast<std::size_t>(n));
        for (auto& v : l) v = rng.uniform() < 0.5 ? 1 : 0;
        l[0] = 1; // >= 1 positive
        return l;
    };

    for (int i = 0; i < 500; ++i) {
        const int n = rng.uniform_int(2, 64);
        const auto s = draw_scores(n);
        auto l = draw_labels(n);
        l[1] = 0; // >= 1 negative
        const double got = pad::auroc(s, l);
        const double want = testutil::oracle_auroc(s, l);
        if (std::abs(got - want) > 1e-9) {
            throw Failure("auroc off by " + str(std::abs(got - want)) + " at instance " + str(i));
        }
    }
    for (int i = 0; i < 500; ++i) {
        const int n = rng.uniform_int(2, 64);
        const auto s = draw_scores(n);
        const auto l = draw_labels(n);
        const double got = pad::average_precision(s, l);
        const double want = testutil::oracle_average_precision(s, l);
        if (std::abs(got - want) > 1e-9) {
            throw Failure("ap off by " + str(std::abs(got - want)) + " at instance " + str(i));
        }
    }
    for (int i = 0; i < 500; ++i) {
        const int n = rng.uniform_int(2, 64);
        const auto s = draw_scores(n);
        const auto l = draw_labels(n);
        const double got = pad::f1_max(s, l).f1;
        const double want = testutil::oracle_f1_max(s, l);
        if (std::abs(got - want) > 1e-9) {
            throw Failure("f1_max off by " + str(std::abs(got - want)) + " at instance " + str(i));
        }
    }
    const double caps[3] = {0.3, 0.5, 1.0};
    for (int i = 0; i < 500; ++i) {
        const int imgs = rng.uniform_int(1, 2); // 5x5 each: instance size <= 50
        std::vector<Eigen::MatrixXd> maps;
        std::vector<pad::Mask> masks;
        bool has_negative = false;
        while (maps.empty() || !has_negative) {
            maps.clear();
            masks.clear();
            has_negative = false;
            for (int im = 0; im < imgs; ++im) {
                Eigen::MatrixXd map(5, 5);
                for (int r = 0; r < 5; ++r) {
                    for (int c = 0; c < 5; ++c) map(r, c) = rng.uniform_int(0, 12) / 12.0;
                }
                maps.push_back(map);
                // First mask is a blob (>= 1 region); later ones may be empty.
                pad::Mask mask = im == 0 ? testutil::blob_mask(5, 5, rng)
                                         : testutil::random_mask(5, 5, rng, 0.35);
                has_negative = has_negative || (mask.array() == 0.0).any();
                masks.push_back(mask);
            }
        }
        const double cap = caps[rng.uniform_int(0, 2)];
        const double got = pad::aupro(maps, masks, cap);
        const double want = testutil::oracle_aupro(maps, masks, cap);
        if (std::abs(got - want) > 1e-9) {
            throw Failure("aupro off by " + str(std::abs(got - want)) + " at instance " + str(i));
        }
    }

    // Worked examples, reproduced exactly.
    expect(pad::auroc({0.9, 0.2, 0.4, 0.6}, {1, 1, 0, 0}) == 0.5,
           "auroc tie example != 0.5");
    expect(pad::average_precision({0.9, 0.6, 0.4}, {1, 0, 1}) == (1.0 + 2.0 / 3.0) / 2.0,
           "ap example != (1 + 2/3)/2");
    expect(pad::f1_max({0.9, 0.4, 0.1}, {1, 0, 1}).f1 == 0.8, "f1 example != 0.8");

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 30.0, "runtime " + str(secs) + "s exceeds 30s");
}

// ------------------------------------------------------------ criterion 3 --

void criterion_freeze_discipline() {
    pad::RunConfig cfg = testutil::tiny_config(21);
    pad::Model model = pad::Model::create(cfg);
    const pad::DatasetManifest data = toy_dataset(cfg, 2, 321);
    const auto train = data.split(pad::Split::train);

    auto run = [&](pad::Stage stage) {
        const auto sc = pad::StageConfig::from_run_config(cfg, stage);
        pad::run_stage(model, sc, train, train);
    };
    auto verify = [&](const std::map<std::string, std::uint64_t>& before,
                      const std::map<std::string, std::uint64_t>& after,
                      const std::vector<std::string>& trainable, const std::string& stage) {
        for (const auto& [name, sum] : before) {
            const bool is_trainable =
                std::find(trainable.begin(), trainable.end(), name) != trainable.end();
            if (is_trainable) {
                expect(after.at(name) != sum, "stage " + stage + " left trainable group '" +
                                                  name + "' untouched");
            } else {
                expect(after.at(name) == sum,
                       "stage " + stage + " modified frozen group '" + name + "'");
            }
        }
    };

    auto before = all_checksums(model);
    run(pad::Stage::I);
    auto after = all_checksums(model);
    verify(before, after, pad::trainable_parameters(pad::Stage::I), "I");

    before = after;
    run(pad::Stage::II);
    after = all_checksums(model);
    verify(before, after, pad::trainable_parameters(pad::Stage::II), "II");

    // The pipeline freezes the anchor cache between Stages II and III.
    model.cached_anchors =
        pad::encode_anchor_set(model.prompts, model.schedule, model.backbone);

    before = after;
    run(pad::Stage::III);
    after = all_checksums(model);
    verify(before, after, pad::trainable_parameters(pad::Stage::III), "III");
}

// ------------------------------------------------------------ criterion 4 --

void criterion_gradients() {
    pad::RunConfig cfg = testutil::tiny_config(4);
    pad::Model model = pad::Model::create(cfg);
    pad::Rng rng(44);
    const pad::Image img = testutil::random_image(cfg.input_size, cfg.input_size, rng);
    pad::Mask mask = pad::Mask::Zero(cfg.input_size, cfg.input_size);
    mask.block(0, cfg.input_size / 2, cfg.input_size / 2, cfg.input_size / 2).setOnes();
    const int y = 2;

    // Full end-to-end loss: adapted vision pass, live anchors, classification
    // and segmentation terms combined with the lambda weighting.
    auto build_loss = [&](pad::ad::Tape& tape) {
        auto v = model.vision_forward(tape, img);
        pad::ad::Var anchors =
            pad::encode_anchor_set_var(tape, model.prompts, model.schedule, model.backbone);
        pad::ad::Var cls_probs =
            pad::cosine_softmax_var(tape, v.global, anchors, cfg.temperature, true);
        pad::ad::Var cls = pad::classification_loss_var(tape, cls_probs, y);
        pad::ad::Var tok =
            pad::cosine_softmax_var(tape, v.f_mg, anchors, cfg.temperature, false);
        const auto planes = pad::upsample_token_probs_var(tape, tok, v.grid_h, v.grid_w,
                                                          cfg.input_size, cfg.input_size);
        const auto [dice, focal] =
            pad::segmentation_loss_var(tape, planes, mask, y, cfg.focal_gamma,
                                       cfg.focal_alpha, cfg.dice_epsilon);
        return tape.add(tape.add(tape.scale(cls, cfg.lambda), dice), focal);
    };
    const std::function<double()> loss_value = [&]() {
        pad::ad::Tape tape;
        return build_loss(tape).scalar();
    };

    struct Target {
        pad::ad::Parameter* p;
        const char* what;
    };
    std::vector<Target> targets = {
        {&model.adapters.adapters[0].w, "adapter weight"},
        {&model.projectors.projectors[0].w, "projector weight"},
        {&model.prompts.learnable_clean, "clean prompt embedding"},
        {&model.prompts.learnable_artifact[1], "artifact prompt embedding"},
        {&model.schedule.tokens[0], "injection tokens"},
    };
    for (auto& t : targets) t.p->zero_grad();
    {
        pad::ad::Tape tape;
        tape.backward(build_loss(tape));
    }

    for (auto& t : targets) {
        const int rows = static_cast<int>(t.p->value.rows());
        const int cols = static_cast<int>(t.p->value.cols());
        const int probes[3][2] = {
            {0, 0}, {rows / 2, cols / 2}, {rows - 1, cols - 1}};
        for (const auto& rc : probes) {
            const double analytic = t.p->grad(rc[0], rc[1]);
            const double numeric =
                testutil::central_difference(loss_value, t.p->value, rc[0], rc[1]);
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            const double rel = std::abs(analytic - numeric) / denom;
            expect(rel <= 1e-3, std::string(t.what) + " (" + str(rc[0]) + "," + str(rc[1]) +
                                    "): analytic " + str(analytic) + " vs numeric " +
                                    str(numeric) + ", rel " + str(rel));
        }
    }
}

// ------------------------------------------------------------ criterion 5 --

void criterion_identities() {
    pad::Rng rng(505);

    // beta = 0: the adapted pass is bit-identical to the frozen backbone.
    pad::ToyBackboneConfig tb;
    tb.vision_layers = 3;
    tb.input_size = 32;
    tb.patch_size = 16;
    tb.seed = 55;
    const pad::Backbone bb = pad::make_toy_backbone(tb);
    const pad::Image img = testutil::random_image(32, 32, rng);
    pad::AdapterStack stack = pad::make_adapter_stack(2, tb.token_dim, 0.0, 77);
    pad::ad::Tape t1, t2;
    const auto plain = bb.encode_image_layers(t1, img);
    const auto hooked = bb.encode_image_layers(t2, img, pad::attach_hooks(stack));
    expect(plain.layer_features.size() == hooked.layer_features.size(),
           "beta=0 layer count mismatch");
    for (std::size_t i = 0; i < plain.layer_features.size(); ++i) {
        expect(bit_equal(plain.layer_features[i].val(), hooked.layer_features[i].val()),
               "beta=0 changed layer " + str(i + 1));
    }
    expect(bit_equal(plain.global.val(), hooked.global.val()),
           "beta=0 changed the pooled embedding");

    // J = 0: the schedule is empty and anchor encoding equals an encode that
    // never heard of injections; injecting the vanilla prefix values at a
    // designated layer is likewise a no-op.
    const pad::DeepPromptSchedule none = pad::injection_schedule(bb, 0, 0, 9);
    expect(none.tokens.empty() && none.designated_layers.empty(),
           "J=0 schedule is not empty");
    pad::RunConfig cfg = testutil::tiny_config(50);
    cfg.deep_prompt_tokens = 0;
    cfg.deep_prompt_depth = 0;
    cfg.validate();
    pad::Model mj = pad::Model::create(cfg);
    pad::DeepPromptSchedule vanilla;
    const pad::AnchorSet a = mj.current_anchors();
    const pad::AnchorSet b = pad::encode_anchor_set(mj.prompts, vanilla, mj.backbone);
    expect(bit_equal(a.anchors, b.anchors), "J=0 anchors differ from vanilla encoding");

    const std::vector<int> ids = bb.tokenize("a photo of an object");
    const Eigen::MatrixXd emb = bb.embed_tokens(ids);
    pad::ad::Tape t3, t4;
    const pad::ad::Var v1 = bb.encode_text_with_injections(t3, t3.constant(emb), {});
    const int J = 2;
    const Eigen::MatrixXd prefix =
        emb.topRows(J) + bb.text.pos_embed.value.topRows(J);
    const std::map<int, pad::ad::Var> inj{{1, t4.constant(prefix)}};
    const pad::ad::Var v2 = bb.encode_text_with_injections(t4, t4.constant(emb), inj);
    expect(bit_equal(v1.val(), v2.val()), "vanilla-prefix injection is not a no-op");

    // M = 0: compositing returns the clean image bit-for-bit.
    pad::CompositeSpec spec;
    spec.clean = testutil::random_image(12, 9, rng);
    spec.pattern = testutil::random_image(12, 9, rng);
    spec.mask = pad::Mask::Zero(12, 9);
    spec.phi = 0.7;
    expect(images_bit_equal(pad::composite(spec), spec.clean),
           "M=0 composite is not the clean image");
}

// ------------------------------------------------------------ criterion 6 --

void criterion_overfit() {
    const auto t0 = Clock::now();
    pad::RunConfig cfg = testutil::tiny_config(6);
    cfg.temperature = 0.2;
    cfg.learning_rate = 5e-3;
    cfg.epochs_stage1 = 40;
    cfg.epochs_stage2 = 40;
    cfg.epochs_stage3 = 40;
    cfg.validate();

    g_toy.emplace();
    g_toy->cfg = cfg;
    g_toy->data = toy_dataset(cfg, 3, 616);
    expect(static_cast<int>(g_toy->data.samples.size()) == 12, "fixture is not 12 samples");

    pad::Model model = pad::Model::create(cfg);
    pad::TrainResult result = pad::train_full(model, g_toy->data, g_toy->dir.path() / "run");

    double initial = -1.0, final_loss = -1.0;
    for (const auto& entry : result.log) {
        if (entry.val) continue;
        if (initial < 0.0) initial = entry.loss.total;
        final_loss = entry.loss.total;
    }
    expect(initial > 0.0, "no train-step entries in the log");
    expect(final_loss < 0.25 * initial, "final train loss " + str(final_loss) +
                                            " not below 25% of initial " + str(initial));

    const auto train = g_toy->data.split(pad::Split::train);
    const pad::MetricReport report =
        pad::evaluate(model.predictor(), train, g_toy->data.class_table, cfg.fpr_cap);
    expect(report.cls_macro.f1 == 1.0,
           "train C-F1 " + str(report.cls_macro.f1) + " != 1.0");
    expect(report.seg.auroc >= 0.95,
           "train S-AUROC " + str(report.seg.auroc) + " < 0.95");

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 300.0, "runtime " + str(secs) + "s exceeds 5 minutes");

    g_toy->model = std::move(model);
    g_toy->log = std::move(result.log);
}

// ------------------------------------------------------------ criterion 7 --

void criterion_anchor_separation() {
    expect(g_toy.has_value() && g_toy->model.has_value(),
           "trained toy fixture unavailable (criterion 6 did not finish)");
    pad::Model fresh = pad::Model::create(g_toy->cfg);
    const pad::AnchorSet before = fresh.current_anchors();
    expect(g_toy->model->cached_anchors.has_value(), "trained model has no anchor cache");
    const pad::AnchorSet after = *g_toy->model->cached_anchors;

    const pad::AnchorSeparationStats stats = pad::anchor_separation_report(before, after);
    expect(std::isfinite(stats.clean_vs_artifact_mean_before) &&
               std::isfinite(stats.clean_vs_artifact_mean_after),
           "non-finite anchor statistics");
    expect(stats.clean_vs_artifact_mean_after < stats.clean_vs_artifact_mean_before,
           "clean-vs-artifact cosine did not drop: " +
               str(stats.clean_vs_artifact_mean_before) + " -> " +
               str(stats.clean_vs_artifact_mean_after));
}

// ------------------------------------------------------------ criterion 8 --

void criterion_normalization() {
    pad::Rng rng(808);
    auto random_matrix = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
        }
        return m;
    };

    // 10,000 scoring calls: every emitted probability vector is a simplex.
    for (int i = 0; i < 10000; ++i) {
        pad::AnchorSet anchors;
        anchors.anchors = random_matrix(4, 8);
        for (int r = 0; r < anchors.anchors.rows(); ++r) {
            anchors.anchors.row(r).normalize();
        }
        const Eigen::MatrixXd f_img = random_matrix(1, 8);
        const Eigen::MatrixXd f_mg = random_matrix(4, 8);
        const double temperature = rng.uniform(0.1, 2.0);
        const pad::Predictions p =
            pad::score_against_anchors(f_img, f_mg, anchors, temperature, 2, 2, 6, 6);
        if (std::abs(p.class_probs.sum() - 1.0) > 1e-6) {
            throw Failure("class probs sum off at call " + str(i));
        }
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                double s = 0.0;
                for (const auto& plane : p.patch_probs) s += plane(r, c);
                if (std::abs(s - 1.0) > 1e-6) {
                    throw Failure("patch probs sum off at call " + str(i));
                }
            }
        }
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) {
                double s = 0.0;
                for (const auto& plane : p.pixel_probs) s += plane(r, c);
                if (std::abs(s - 1.0) > 1e-6) {
                    throw Failure("pixel probs sum off at call " + str(i));
                }
            }
        }
    }

    // Anchor rows leave the encoder unit-norm.
    pad::ToyBackboneConfig tb;
    tb.seed = 3;
    const pad::Backbone bb = pad::make_toy_backbone(tb);
    const pad::ClassTable table = pad::ClassTable::defaults();
    for (int i = 0; i < 50; ++i) {
        pad::PromptBank bank = pad::build_prompts(bb, table, 4, 1000 + i);
        pad::DeepPromptSchedule sched = pad::injection_schedule(bb, 2, 2, 2000 + i);
        const pad::AnchorSet anchors = pad::encode_anchor_set(bank, sched, bb);
        for (int r = 0; r < anchors.anchors.rows(); ++r) {
            if (std::abs(anchors.anchors.row(r).norm() - 1.0) > 1e-6) {
                throw Failure("anchor row " + str(r) + " not unit at encode " + str(i));
            }
        }
    }

    // Aggregated multi-granularity tokens are unit-norm.
    pad::ProjectorBank bank = pad::make_projector_bank({1, 2}, 16, 8, 3000);
    for (int i = 0; i < 1000; ++i) {
        if (i % 100 == 0) bank = pad::make_projector_bank({1, 2}, 16, 8, 3000 + i);
        pad::ad::Tape tape;
        const std::vector<pad::ad::Var> tapped = {tape.constant(random_matrix(4, 16)),
                                                  tape.constant(random_matrix(4, 16))};
        const pad::ad::Var f = pad::aggregate_multigranularity(tape, tapped, bank);
        for (int r = 0; r < f.rows(); ++r) {
            if (std::abs(f.val().row(r).norm() - 1.0) > 1e-6) {
                throw Failure("F_MG row " + str(r) + " not unit at call " + str(i));
            }
        }
    }
}

// ------------------------------------------------------------ criterion 9 --

void criterion_round_trips() {
    // Checkpoint: save -> load -> bit-identical predictions.
    pad::RunConfig cfg = testutil::tiny_config(31);
    pad::Model m1 = pad::Model::create(cfg);
    m1.cached_anchors = m1.current_anchors();
    m1.mask_threshold = 0.41;
    m1.completed_stages = {"I", "II"};
    testutil::TempDir dir;
    pad::save_checkpoint(m1, dir.path() / "ckpt");
    pad::Model m2 = pad::load_checkpoint(dir.path() / "ckpt");
    expect(m2.mask_threshold.has_value() && *m2.mask_threshold == 0.41,
           "mask threshold did not round-trip");
    expect(m2.completed_stages == m1.completed_stages, "stage markers did not round-trip");
    pad::Rng rng(909);
    for (int i = 0; i < 3; ++i) {
        const pad::Image probe = testutil::random_image(20 + 4 * i, 26, rng);
        const pad::Predictions p1 = m1.predict_image(probe, probe.height, probe.width);
        const pad::Predictions p2 = m2.predict_image(probe, probe.height, probe.width);
        expect(predictions_bit_equal(p1, p2),
               "probe " + str(i) + " predictions differ after reload");
    }

    // Manifest: load -> save -> load reproduces the identical sample set.
    testutil::TempDir corpus;
    const pad::ClassTable table = pad::ClassTable::defaults();
    pad::DatasetManifest m0;
    m0.class_table = table;
    m0.base_dir = corpus.path();
    const pad::Split splits[3] = {pad::Split::train, pad::Split::val, pad::Split::test};
    for (int i = 0; i < 6; ++i) {
        pad::Sample s;
        s.image_path = "img" + str(i) + ".png";
        s.id = pad::sample_id_for_path(s.image_path);
        pad::Image img = testutil::random_image(10, 14, rng);
        pad::save_image_png(img, corpus.path() / s.image_path);
        if (i < 2) {
            s.class_id = 0;
            s.origin = pad::Origin::clean;
        } else {
            s.class_id = 1 + (i - 2) % 3;
            s.origin = i == 5 ? pad::Origin::real : pad::Origin::synthetic;
            s.mask_path = "img" + str(i) + "-mask.png";
            pad::save_mask_png(testutil::blob_mask(10, 14, rng), corpus.path() / s.mask_path);
            s.phi = 0.5 + 0.07 * i;
            if (i == 3) s.object_name = "panel";
        }
        m0.split_assignments[s.id] = splits[i % 3];
        m0.samples.push_back(std::move(s));
    }
    pad::save_manifest(m0, corpus.path() / "a.jsonl");
    const pad::DatasetManifest r1 = pad::load_manifest(corpus.path() / "a.jsonl", table);
    pad::save_manifest(r1, corpus.path() / "b.jsonl");
    const pad::DatasetManifest r2 = pad::load_manifest(corpus.path() / "b.jsonl", table);

    expect(r1.samples.size() == r2.samples.size(), "sample count changed across round trip");
    expect(r1.split_assignments == r2.split_assignments, "split assignments changed");
    for (std::size_t i = 0; i < r1.samples.size(); ++i) {
        const pad::Sample& x = r1.samples[i];
        const pad::Sample& y = r2.samples[i];
        expect(x.id == y.id && x.image_path == y.image_path && x.mask_path == y.mask_path,
               "sample path fields changed at index " + str(i));
        expect(x.class_id == y.class_id && x.origin == y.origin, "sample labels changed");
        expect(x.phi == y.phi && x.object_name == y.object_name,
               "sample metadata changed at index " + str(i));
        expect(images_bit_equal(x.image, y.image), "pixels changed at index " + str(i));
        expect(bit_equal(x.mask, y.mask), "mask changed at index " + str(i));
    }
}

// ----------------------------------------------------------- criterion 10 --

void criterion_ablations() {
    const pad::RunConfig base = testutil::tiny_config(10);
    pad::Rng rng(1010);
    const pad::Image probe = testutil::random_image(base.input_size, base.input_size, rng);
    auto sane_prediction = [&](pad::Model& m, const std::string& variant) {
        const pad::Predictions p = m.predict_image(probe, 8, 8);
        expect(std::abs(p.class_probs.sum() - 1.0) <= 1e-9,
               variant + ": prediction is not a simplex");
    };

    { // w/o LTE: learnable contexts disappear entirely.
        pad::RunConfig cfg = base;
        cfg.use_learnable_prompts = false;
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        expect(!m.prompts.learnable_enabled, "w/o LTE: flag still set");
        expect(m.prompts.learnable_clean.value.rows() == 0,
               "w/o LTE: clean context still has rows");
        for (const auto& p : m.prompts.learnable_artifact) {
            expect(p.value.rows() == 0, "w/o LTE: artifact context still has rows");
        }
        sane_prediction(m, "w/o LTE");
    }
    { // w/o CLS: the template tokens drop out of the prompt sequences.
        pad::RunConfig cfg = base;
        cfg.use_cls_tokens = false;
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        expect(!m.prompts.cls_enabled, "w/o CLS: flag still set");
        sane_prediction(m, "w/o CLS");
    }
    { // w/o AD: zero adapter hooks on the vision tower.
        pad::RunConfig cfg = base;
        cfg.adapter_layers = 0;
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        expect(m.adapters.adapted_layers() == 0, "w/o AD: adapters still attached");
        expect(pad::attach_hooks(m.adapters).empty(), "w/o AD: hook map not empty");
        sane_prediction(m, "w/o AD");
    }
    { // w/o MG: a single final-layer tap.
        pad::RunConfig cfg = base;
        cfg.taps = {cfg.toy.vision_layers};
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        expect(m.projectors.projectors.size() == 1, "w/o MG: more than one projector");
        expect(m.projectors.taps == std::vector<int>{cfg.toy.vision_layers},
               "w/o MG: tap is not the final layer");
        sane_prediction(m, "w/o MG");
    }
    { // w/o S-I: heads are never trained.
        pad::RunConfig cfg = base;
        cfg.stages = {"II", "III"};
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        const auto cls0 = m.group_checksum("cls_head");
        const auto seg0 = m.group_checksum("seg_head");
        const pad::DatasetManifest data = toy_dataset(cfg, 2, 105);
        testutil::TempDir dir;
        pad::train_full(m, data, dir.path() / "out");
        expect(m.completed_stages == std::vector<std::string>{"II", "III"},
               "w/o S-I: wrong stage markers");
        expect(m.group_checksum("cls_head") == cls0 && m.group_checksum("seg_head") == seg0,
               "w/o S-I: heads moved");
        expect(m.cached_anchors.has_value(), "w/o S-I: Stage II left no anchor cache");
    }
    { // w/o S-II/III: no anchor cache; inference falls back to the heads.
        pad::RunConfig cfg = base;
        cfg.stages = {"I"};
        cfg.validate();
        pad::Model m = pad::Model::create(cfg);
        const auto prompts0 = m.group_checksum("prompt_embeddings");
        const auto inj0 = m.group_checksum("deep_prompt_tokens");
        const pad::DatasetManifest data = toy_dataset(cfg, 2, 106);
        testutil::TempDir dir;
        pad::train_full(m, data, dir.path() / "out");
        expect(m.completed_stages == std::vector<std::string>{"I"},
               "w/o S-II/III: wrong stage markers");
        expect(m.group_checksum("prompt_embeddings") == prompts0 &&
                   m.group_checksum("deep_prompt_tokens") == inj0,
               "w/o S-II/III: prompt state moved");
        expect(!m.cached_anchors.has_value(), "w/o S-II/III: anchor cache exists");
        const pad::Predictions pa =
            m.predict_image(probe, 8, 8, pad::ScoreSource::automatic);
        const pad::Predictions ph = m.predict_image(probe, 8, 8, pad::ScoreSource::heads);
        expect(predictions_bit_equal(pa, ph),
               "w/o S-II/III: automatic scoring does not match the heads");
    }
}

// ------------------------------------------------------------------ main --

int g_failures = 0;

void run_criterion(int id, const char* label, const std::function<void()>& body) {
    const auto t0 = Clock::now();
    try {
        body();
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("[PASS] criterion %d: %s (%.1fs)\n", id, label, secs);
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] criterion %d: %s -- %s\n", id, label, e.what());
    }
    std::fflush(stdout);
}

} // namespace

int main() {
    run_criterion(1, "compositing fidelity", criterion_compositing);
    run_criterion(2, "metric oracle equivalence", criterion_metric_oracles);
    run_criterion(3, "stage freeze discipline", criterion_freeze_discipline);
    run_criterion(4, "gradient correctness", criterion_gradients);
    run_criterion(5, "identity degeneracies", criterion_identities);
    run_criterion(6, "toy overfit", criterion_overfit);
    run_criterion(7, "anchor separation direction", criterion_anchor_separation);
    run_criterion(8, "normalization invariants", criterion_normalization);
    run_criterion(9, "round-trip stability", criterion_round_trips);
    run_criterion(10, "ablation wiring", criterion_ablations);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
