#pragma once

// Shared fixtures and independent oracles. The oracles here are deliberately
// naive (pairwise counts, full re-thresholding per candidate) so they share
// no code path with the library implementations they check.

#include "pad/config.hpp"
#include "pad/image.hpp"
#include "pad/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path() / "padkit-test-XXXXXX";
        std::string tmpl = base.string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline pad::Image random_image(int h, int w, pad::Rng& rng) {
    pad::Image img(h, w);
    for (auto& plane : img.ch) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) plane(r, c) = rng.uniform();
        }
    }
    return img;
}

inline pad::Mask random_mask(int h, int w, pad::Rng& rng, double density = 0.3) {
    pad::Mask m = pad::Mask::Zero(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) m(r, c) = rng.uniform() < density ? 1.0 : 0.0;
    }
    return m;
}

/// A single filled rectangle; always nonempty.
inline pad::Mask blob_mask(int h, int w, pad::Rng& rng) {
    pad::Mask m = pad::Mask::Zero(h, w);
    const int r0 = rng.uniform_int(0, h - 2);
    const int c0 = rng.uniform_int(0, w - 2);
    const int r1 = rng.uniform_int(r0 + 1, h - 1);
    const int c1 = rng.uniform_int(c0 + 1, w - 1);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) m(r, c) = 1.0;
    }
    return m;
}

/// Tiny toy-backbone run config shared by the model/trainer tests:
/// 2x2 patch grid, d=16, embed=8.
inline pad::RunConfig tiny_config(std::uint64_t seed = 7) {
    pad::RunConfig c;
    c.input_size = 32;
    c.batch_size = 4;
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
    c.epochs_stage1 = 1;
    c.epochs_stage2 = 1;
    c.epochs_stage3 = 1;
    c.seed = seed;
    c.validate();
    return c;
}

/// Central finite difference of f at one entry of m.
inline double central_difference(const std::function<double()>& f, Eigen::MatrixXd& m, int r,
                                 int c, double h = 1e-5) {
    const double orig = m(r, c);
    m(r, c) = orig + h;
    const double fp = f();
    m(r, c) = orig - h;
    const double fm = f();
    m(r, c) = orig;
    return (fp - fm) / (2.0 * h);
}

// ------------------------------------------------------------- oracles ----

/// Pairwise Mann-Whitney: P(score+ > score-) + half credit on ties.
inline double oracle_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double credit = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) credit += 1.0;
            else if (scores[i] == scores[j]) credit += 0.5;
        }
    }
    return credit / pairs;
}

/// Step-wise AP via full re-thresholding at every distinct score.
inline double oracle_average_precision(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
    std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
    double positives = 0.0;
    for (int l : labels) positives += l;
    double ap = 0.0;
    double prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0, predicted = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                predicted += 1.0;
                if (labels[i] == 1) tp += 1.0;
            }
        }
        const double precision = tp / predicted;
        const double recall = tp / positives;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    return ap;
}

/// Max F1 over observed-score thresholds, each evaluated from scratch.
inline double oracle_f1_max(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::set<double> thresholds(scores.begin(), scores.end());
    double positives = 0.0;
    for (int l : labels) positives += l;
    double best = 0.0;
    for (double t : thresholds) {
        double tp = 0.0, predicted = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                predicted += 1.0;
                if (labels[i] == 1) tp += 1.0;
            }
        }
        if (predicted == 0.0) continue;
        const double precision = tp / predicted;
        const double recall = tp / positives;
        const double f1 = (precision + recall) > 0.0
                              ? 2.0 * precision * recall / (precision + recall)
                              : 0.0;
        best = std::max(best, f1);
    }
    return best;
}

/// BFS 8-connectivity labeling (library uses DFS flood fill).
inline std::pair<Eigen::MatrixXi, int> oracle_regions(const pad::Mask& mask) {
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    Eigen::MatrixXi labels = Eigen::MatrixXi::Constant(h, w, -1);
    int count = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask(r, c) == 0.0 || labels(r, c) >= 0) continue;
            std::deque<std::pair<int, int>> queue{{r, c}};
            labels(r, c) = count;
            while (!queue.empty()) {
                auto [cr, cc] = queue.front();
                queue.pop_front();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        if (mask(nr, nc) == 0.0 || labels(nr, nc) >= 0) continue;
                        labels(nr, nc) = count;
                        queue.emplace_back(nr, nc);
                    }
                }
            }
            ++count;
        }
    }
    return {labels, count};
}

/// Exhaustive threshold sweep: at every distinct score, recompute the mean
/// per-region overlap and the global FPR from scratch, then integrate by
/// trapezoid up to fpr_cap (points past the cap dropped, last PRO held flat
/// to the cap boundary) and normalize.
inline double oracle_aupro(const std::vector<Eigen::MatrixXd>& maps,
                           const std::vector<pad::Mask>& masks, double fpr_cap) {
    struct Region {
        std::size_t image;
        int label;
        double size;
    };
    std::vector<Eigen::MatrixXi> labelled;
    std::vector<Region> regions;
    double negatives = 0.0;
    std::set<double, std::greater<double>> thresholds;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        auto [labels, count] = oracle_regions(masks[i]);
        labelled.push_back(labels);
        for (int k = 0; k < count; ++k) {
            double size = 0.0;
            for (int r = 0; r < labels.rows(); ++r) {
                for (int c = 0; c < labels.cols(); ++c) {
                    if (labels(r, c) == k) size += 1.0;
                }
            }
            regions.push_back({i, k, size});
        }
        negatives += (masks[i].array() == 0.0).count();
        for (int r = 0; r < maps[i].rows(); ++r) {
            for (int c = 0; c < maps[i].cols(); ++c) thresholds.insert(maps[i](r, c));
        }
    }

    std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
    for (double t : thresholds) {
        double fp = 0.0;
        double pro_sum = 0.0;
        for (const Region& reg : regions) {
            const Eigen::MatrixXi& labels = labelled[reg.image];
            const Eigen::MatrixXd& map = maps[reg.image];
            double overlap = 0.0;
            for (int r = 0; r < labels.rows(); ++r) {
                for (int c = 0; c < labels.cols(); ++c) {
                    if (labels(r, c) == reg.label && map(r, c) >= t) overlap += 1.0;
                }
            }
            pro_sum += overlap / reg.size;
        }
        for (std::size_t i = 0; i < masks.size(); ++i) {
            for (int r = 0; r < masks[i].rows(); ++r) {
                for (int c = 0; c < masks[i].cols(); ++c) {
                    if (masks[i](r, c) == 0.0 && maps[i](r, c) >= t) fp += 1.0;
                }
            }
        }
        curve.emplace_back(fp / negatives, pro_sum / static_cast<double>(regions.size()));
    }

    double area = 0.0;
    double last_fpr = 0.0, last_pro = 0.0;
    for (const auto& [fpr, pro] : curve) {
        if (fpr > fpr_cap) break;
        area += (fpr - last_fpr) * 0.5 * (pro + last_pro);
        last_fpr = fpr;
        last_pro = pro;
    }
    area += (fpr_cap - last_fpr) * last_pro;
    return area / fpr_cap;
}

} // namespace testutil
