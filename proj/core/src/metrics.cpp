#include "pad/metrics.hpp"

#include "pad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pad {

namespace {

void check_paired(const std::vector<double>& scores,
                  const std::vector<int>& labels, const char* op) {
    if (scores.size() != labels.size()) {
        throw DataError(std::string(op) + ": scores and labels differ in length");
    }
    if (scores.empty()) {
        throw DataError(std::string(op) + ": empty input");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw NumericError(std::string(op) + ": non-finite score");
        }
    }
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw DataError(std::string(op) + ": labels must be 0 or 1");
        }
    }
}

// Indices sorted by descending score; ties keep their input order.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    return idx;
}

} // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels, "auroc");
    const std::size_t n = scores.size();
    const long positives = std::count(labels.begin(), labels.end(), 1);
    const long negatives = static_cast<long>(n) - positives;
    if (positives == 0 || negatives == 0) {
        throw DataError("auroc: needs at least one positive and one negative");
    }

    // Rank-sum form of the Mann-Whitney statistic; ties share the average
    // rank, which realizes the half-credit convention.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) positive_rank_sum += avg_rank;
        }
        i = j;
    }

    const double p = static_cast<double>(positives);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(negatives));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
    check_paired(scores, labels, "average_precision");
    const long positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0) {
        throw DataError("average_precision: needs at least one positive");
    }

    const auto idx = descending_order(scores);
    const std::size_t n = idx.size();
    double ap = 0.0;
    long tp = 0;
    long prev_tp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) tp += labels[idx[k]];
        const double precision = static_cast<double>(tp) / static_cast<double>(j);
        const double recall_inc =
            static_cast<double>(tp - prev_tp) / static_cast<double>(positives);
        ap += precision * recall_inc;
        prev_tp = tp;
        i = j;
    }
    return ap;
}

F1Max f1_max(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels, "f1_max");
    const long positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0) {
        throw DataError("f1_max: needs at least one positive");
    }

    const auto idx = descending_order(scores);
    const std::size_t n = idx.size();
    F1Max best{-1.0, 0.0};
    long tp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) tp += labels[idx[k]];
        // Predicting (score >= scores[idx[i]]) marks exactly the first j
        // items positive.
        const double fp = static_cast<double>(j) - static_cast<double>(tp);
        const double fn = static_cast<double>(positives) - static_cast<double>(tp);
        const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        // >= so ties resolve to the lowest threshold.
        if (f1 >= best.f1) {
            best = {f1, scores[idx[i]]};
        }
        i = j;
    }
    return best;
}

std::pair<Eigen::MatrixXi, int> connected_regions(const Mask& mask) {
    if (!is_binary_mask(mask)) {
        throw DataError("connected_regions: mask must be binary");
    }
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    Eigen::MatrixXi labels_out = Eigen::MatrixXi::Constant(h, w, -1);
    int count = 0;
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask(r, c) == 0.0 || labels_out(r, c) >= 0) continue;
            labels_out(r, c) = count;
            stack.push_back({r, c});
            while (!stack.empty()) {
                auto [cr, cc] = stack.back();
                stack.pop_back();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = cr + dr;
                        const int nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        if (mask(nr, nc) == 0.0 || labels_out(nr, nc) >= 0) continue;
                        labels_out(nr, nc) = count;
                        stack.push_back({nr, nc});
                    }
                }
            }
            ++count;
        }
    }
    return {labels_out, count};
}

double aupro(const std::vector<Eigen::MatrixXd>& anomaly_maps,
             const std::vector<Mask>& gt_masks, double fpr_cap) {
    if (!(fpr_cap > 0.0 && fpr_cap <= 1.0)) {
        throw DataError("aupro: fpr_cap must lie in (0, 1]");
    }
    if (anomaly_maps.size() != gt_masks.size()) {
        throw DataError("aupro: map/mask count mismatch");
    }
    if (anomaly_maps.empty()) {
        throw DataError("aupro: empty input");
    }

    // Flatten to (score, region id) pairs with globally unique region ids.
    struct Pixel {
        double score;
        int region; // -1 outside every GT region
    };
    std::vector<Pixel> pixels;
    std::vector<long> region_size;
    long total_negative = 0;
    for (std::size_t m = 0; m < anomaly_maps.size(); ++m) {
        const auto& map = anomaly_maps[m];
        const auto& mask = gt_masks[m];
        if (map.rows() != mask.rows() || map.cols() != mask.cols()) {
            throw DataError("aupro: map and mask shapes differ");
        }
        auto [labels_m, count] = connected_regions(mask);
        const int base = static_cast<int>(region_size.size());
        region_size.resize(region_size.size() + count, 0);
        for (int r = 0; r < mask.rows(); ++r) {
            for (int c = 0; c < mask.cols(); ++c) {
                if (!std::isfinite(map(r, c))) {
                    throw NumericError("aupro: non-finite anomaly score");
                }
                const int rid = labels_m(r, c) >= 0 ? base + labels_m(r, c) : -1;
                pixels.push_back({map(r, c), rid});
                if (rid < 0) {
                    ++total_negative;
                } else {
                    ++region_size[rid];
                }
            }
        }
    }
    if (region_size.empty()) {
        throw DataError("aupro: ground truth contains no regions");
    }
    if (total_negative == 0) {
        throw DataError("aupro: ground truth contains no negative pixels");
    }

    std::sort(pixels.begin(), pixels.end(),
              [](const Pixel& a, const Pixel& b) { return a.score > b.score; });

    // Sweep thresholds downward; each distinct score adds its pixel group to
    // the predicted-positive set. Curve points arrive in ascending-FPR order.
    const double region_count = static_cast<double>(region_size.size());
    std::vector<std::pair<double, double>> curve; // (fpr, pro)
    curve.reserve(pixels.size() + 1);
    curve.push_back({0.0, 0.0}); // virtual start
    double overlap_sum = 0.0;    // sum over regions of |hit| / |region|
    long false_positives = 0;
    std::size_t i = 0;
    while (i < pixels.size()) {
        std::size_t j = i;
        while (j < pixels.size() && pixels[j].score == pixels[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (pixels[k].region < 0) {
                ++false_positives;
            } else {
                overlap_sum += 1.0 / static_cast<double>(region_size[pixels[k].region]);
            }
        }
        const double fpr =
            static_cast<double>(false_positives) / static_cast<double>(total_negative);
        curve.push_back({fpr, overlap_sum / region_count});
        i = j;
    }

    // Integrate to the cap: points beyond it are dropped and the last PRO
    // value extends flat. (Interpolating through dropped points instead
    // would credit an all-zero map with nonzero area.)
    double area = 0.0;
    double last_fpr = 0.0;
    double last_pro = 0.0;
    for (const auto& [fpr, pro] : curve) {
        if (fpr > fpr_cap) break;
        area += (fpr - last_fpr) * 0.5 * (pro + last_pro);
        last_fpr = fpr;
        last_pro = pro;
    }
    area += (fpr_cap - last_fpr) * last_pro;
    return area / fpr_cap;
}

namespace {

MetricBundle classification_bundle(const std::vector<double>& scores,
                                   const std::vector<int>& labels) {
    MetricBundle b;
    b.auroc = auroc(scores, labels);
    b.ap = average_precision(scores, labels);
    const F1Max f = f1_max(scores, labels);
    b.f1 = f.f1;
    b.f1_threshold = f.threshold;
    return b;
}

MetricBundle segmentation_bundle(const std::vector<Eigen::MatrixXd>& maps,
                                 const std::vector<Mask>& masks,
                                 double fpr_cap) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t m = 0; m < maps.size(); ++m) {
        for (int r = 0; r < maps[m].rows(); ++r) {
            for (int c = 0; c < maps[m].cols(); ++c) {
                scores.push_back(maps[m](r, c));
                labels.push_back(masks[m](r, c) != 0.0 ? 1 : 0);
            }
        }
    }
    MetricBundle b = classification_bundle(scores, labels);
    b.aupro = aupro(maps, masks, fpr_cap);
    return b;
}

} // namespace

MetricReport evaluate(const Predictor& predict,
                      const std::vector<const Sample*>& samples,
                      const ClassTable& table, double fpr_cap) {
    if (samples.empty()) {
        throw DataError("evaluate: empty sample set");
    }
    const int K = table.K();

    std::map<int, int> counts;
    for (const Sample* s : samples) counts[s->class_id]++;
    for (int k = 0; k <= K; ++k) {
        if (counts[k] == 0) {
            throw DataError("evaluate: class '" + table.by_id(k).name +
                            "' has no samples in the split");
        }
    }

    // One forward pass per sample, in manifest order.
    std::vector<Eigen::VectorXd> class_probs;
    std::vector<Eigen::MatrixXd> maps;
    std::vector<Mask> masks;
    class_probs.reserve(samples.size());
    maps.reserve(samples.size());
    masks.reserve(samples.size());
    for (const Sample* s : samples) {
        Predictions p = predict(*s);
        if (p.class_probs.size() != K + 1) {
            throw DataError("evaluate: predictor returned " +
                            std::to_string(p.class_probs.size()) +
                            " class probabilities, expected " +
                            std::to_string(K + 1));
        }
        if (p.anomaly_map.rows() != s->mask.rows() ||
            p.anomaly_map.cols() != s->mask.cols()) {
            throw DataError("evaluate: anomaly map shape mismatch for sample '" +
                            s->id + "'");
        }
        class_probs.push_back(p.class_probs);
        maps.push_back(p.anomaly_map);
        masks.push_back(s->mask);
    }

    MetricReport report;
    report.fpr_cap = fpr_cap;
    report.samples_evaluated = static_cast<int>(samples.size());
    report.class_counts = counts;
    for (const auto& cls : table.classes) {
        report.class_names[cls.id] = cls.name;
    }

    // Classification: one-vs-rest per artifact class, macro-averaged.
    for (int k = 1; k <= K; ++k) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            scores.push_back(class_probs[i](k));
            labels.push_back(samples[i]->class_id == k ? 1 : 0);
        }
        report.per_class_cls[k] = classification_bundle(scores, labels);
    }
    for (const auto& [k, b] : report.per_class_cls) {
        (void)k;
        report.cls_macro.auroc += b.auroc;
        report.cls_macro.ap += b.ap;
        report.cls_macro.f1 += b.f1;
    }
    report.cls_macro.auroc /= K;
    report.cls_macro.ap /= K;
    report.cls_macro.f1 /= K;

    // Binary reduction: artifact-vs-clean with score 1 - p(clean).
    {
        std::vector<double> scores;
        std::vector<int> labels;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            scores.push_back(1.0 - class_probs[i](0));
            labels.push_back(samples[i]->class_id != 0 ? 1 : 0);
        }
        report.cls_binary = classification_bundle(scores, labels);
    }

    // Segmentation: pooled over everything, then restricted per class.
    report.seg = segmentation_bundle(maps, masks, fpr_cap);
    for (int k = 1; k <= K; ++k) {
        std::vector<Eigen::MatrixXd> k_maps;
        std::vector<Mask> k_masks;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i]->class_id == k) {
                k_maps.push_back(maps[i]);
                k_masks.push_back(masks[i]);
            }
        }
        report.per_class_seg[k] = segmentation_bundle(k_maps, k_masks, fpr_cap);
    }
    return report;
}

GeneralizationReport generalization_split_eval(
    const Predictor& predict, const std::vector<const Sample*>& synthetic_set,
    const std::vector<const Sample*>& real_set, const ClassTable& table,
    double fpr_cap) {
    if (synthetic_set.empty() || real_set.empty()) {
        throw DataError("generalization_split_eval: both subsets must be nonempty");
    }
    GeneralizationReport g;
    g.synthetic = evaluate(predict, synthetic_set, table, fpr_cap);
    g.real = evaluate(predict, real_set, table, fpr_cap);
    return g;
}

} // namespace pad
