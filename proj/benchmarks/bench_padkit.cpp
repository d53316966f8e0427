// Micro benchmarks for the hot paths: compositing, the metric battery, and
// the toy-backbone inference pipeline. Run ./pad_bench --benchmark_filter=...
// to narrow down.

#include "pad/compositor.hpp"
#include "pad/metrics.hpp"
#include "pad/model.hpp"
#include "pad/rng.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

pad::Image random_image(int h, int w, pad::Rng& rng) {
    pad::Image img(h, w);
    for (auto& plane : img.ch) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) plane(r, c) = rng.uniform();
        }
    }
    return img;
}

pad::Mask random_mask(int h, int w, pad::Rng& rng, double density) {
    pad::Mask m = pad::Mask::Zero(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) m(r, c) = rng.uniform() < density ? 1.0 : 0.0;
    }
    return m;
}

pad::RunConfig toy_run_config() {
    pad::RunConfig c;
    c.input_size = 32;
    c.toy.vision_layers = 4;
    c.toy.token_dim = 16;
    c.toy.embed_dim = 8;
    c.toy.patch_size = 16;
    c.toy.vision_heads = 2;
    c.toy.text_layers = 3;
    c.toy.text_token_dim = 16;
    c.toy.text_heads = 2;
    c.toy.max_sequence = 24;
    c.toy.vocab_size = 128;
    c.adapter_layers = 2;
    c.taps = {2, 4};
    c.prompt_length = 4;
    c.deep_prompt_tokens = 2;
    c.deep_prompt_depth = 2;
    c.seed = 17;
    return c;
}

// ------------------------------------------------------------- composite --

void BM_Composite(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    pad::Rng rng(1);
    pad::CompositeSpec spec;
    spec.clean = random_image(size, size, rng);
    spec.pattern = random_image(size, size, rng);
    spec.mask = random_mask(size, size, rng, 0.3);
    spec.phi = 0.7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(pad::composite(spec));
    }
    state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_Composite)->Arg(64)->Arg(128)->Arg(256);

void BM_PlacePattern(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    pad::Rng rng(2);
    const pad::Image pattern = random_image(size / 2, size / 2, rng);
    pad::Mask anchor = pad::Mask::Zero(size, size);
    anchor.block(size / 4, size / 4, size / 4, size / 4).setOnes();
    for (auto _ : state) {
        pad::Rng draw(3);
        benchmark::DoNotOptimize(pad::place_pattern(pattern, anchor, size, size, draw));
    }
}
BENCHMARK(BM_PlacePattern)->Arg(128)->Arg(256);

// --------------------------------------------------------------- metrics --

struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;
};

ScoredSet scored_set(int n) {
    pad::Rng rng(4);
    ScoredSet s;
    s.scores.reserve(n);
    s.labels.reserve(n);
    for (int i = 0; i < n; ++i) {
        s.scores.push_back(rng.uniform_int(0, 999) / 999.0); // ties included
        s.labels.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    s.labels[0] = 1;
    s.labels[1] = 0;
    return s;
}

void BM_Auroc(benchmark::State& state) {
    const auto s = scored_set(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pad::auroc(s.scores, s.labels));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auroc)->Arg(1024)->Arg(16384);

void BM_AveragePrecision(benchmark::State& state) {
    const auto s = scored_set(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pad::average_precision(s.scores, s.labels));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AveragePrecision)->Arg(1024)->Arg(16384);

void BM_F1Max(benchmark::State& state) {
    const auto s = scored_set(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pad::f1_max(s.scores, s.labels));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_F1Max)->Arg(1024)->Arg(16384);

void BM_Aupro(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    pad::Rng rng(5);
    std::vector<Eigen::MatrixXd> maps;
    std::vector<pad::Mask> masks;
    for (int i = 0; i < 4; ++i) {
        Eigen::MatrixXd map(size, size);
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) map(r, c) = rng.uniform_int(0, 255) / 255.0;
        }
        maps.push_back(map);
        pad::Mask m = pad::Mask::Zero(size, size);
        m.block(size / 4, size / 4, size / 3, size / 3).setOnes();
        masks.push_back(m);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(pad::aupro(maps, masks, 0.3));
    }
}
BENCHMARK(BM_Aupro)->Arg(32)->Arg(64);

// ------------------------------------------------------------- toy model --

void BM_VisionForward(benchmark::State& state) {
    pad::Model model = pad::Model::create(toy_run_config());
    pad::Rng rng(6);
    const pad::Image img = random_image(32, 32, rng);
    for (auto _ : state) {
        pad::ad::Tape tape;
        benchmark::DoNotOptimize(model.vision_forward(tape, img));
    }
}
BENCHMARK(BM_VisionForward);

void BM_EncodeAnchors(benchmark::State& state) {
    pad::Model model = pad::Model::create(toy_run_config());
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            pad::encode_anchor_set(model.prompts, model.schedule, model.backbone));
    }
}
BENCHMARK(BM_EncodeAnchors);

void BM_PredictImage(benchmark::State& state) {
    pad::Model model = pad::Model::create(toy_run_config());
    model.cached_anchors = model.current_anchors();
    pad::Rng rng(7);
    const pad::Image img = random_image(64, 64, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict_image(img, 64, 64));
    }
}
BENCHMARK(BM_PredictImage);

} // namespace

BENCHMARK_MAIN();
