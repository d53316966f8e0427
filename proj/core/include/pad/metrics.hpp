#pragma once

#include "pad/manifest.hpp"
#include "pad/scoring.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pad {

/// Mann–Whitney AUROC: P(score+ > score-) + 0.5 * P(tie).
/// Requires at least one positive and one negative label.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Step-wise average precision (no interpolation). Samples sharing a score
/// enter the ranking together. Requires at least one positive label.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

struct F1Max {
    double f1 = 0.0;
    double threshold = 0.0; // lowest threshold achieving the max
};

/// Maximizes F1 over prediction rules (score >= t) where t ranges over the
/// observed scores. Requires at least one positive label.
F1Max f1_max(const std::vector<double>& scores, const std::vector<int>& labels);

/// 8-connectivity labeling of a binary mask. Returns per-pixel region ids
/// (-1 for background, 0..count-1 otherwise) and the region count.
std::pair<Eigen::MatrixXi, int> connected_regions(const Mask& mask);

/// Area under the per-region-overlap curve, integrated over the global
/// false-positive rate in [0, fpr_cap] and normalized by fpr_cap.
///
/// The sweep visits every distinct score (prediction rule: score >= t), the
/// curve starts at a virtual (0, 0), points beyond the cap are dropped, and
/// the last surviving PRO value extends flat to the cap.
double aupro(const std::vector<Eigen::MatrixXd>& anomaly_maps,
             const std::vector<Mask>& gt_masks, double fpr_cap);

struct MetricBundle {
    double auroc = 0.0;
    double ap = 0.0;
    double f1 = 0.0;
    double f1_threshold = 0.0;
    std::optional<double> aupro; // segmentation bundles only
};

struct MetricReport {
    // Headline classification row: macro average of one-vs-rest over the
    // artifact classes. The binary row scores artifact-vs-clean with
    // 1 - p(clean).
    MetricBundle cls_macro;
    MetricBundle cls_binary;

    // Pixels pooled over every sample; clean images contribute all-negative
    // pixels. Per-class rows restrict to samples of that class.
    MetricBundle seg;

    std::map<int, MetricBundle> per_class_cls; // k in 1..K
    std::map<int, MetricBundle> per_class_seg; // k in 1..K
    std::map<int, std::string> class_names;    // includes clean (id 0)
    std::map<int, int> class_counts;

    int samples_evaluated = 0;
    double fpr_cap = 0.3;
};

using Predictor = std::function<Predictions(const Sample&)>;

/// Runs the predictor over the given samples and computes the full
/// seven-metric battery. Every class id 0..K must appear in the set.
MetricReport evaluate(const Predictor& predict,
                      const std::vector<const Sample*>& samples,
                      const ClassTable& table, double fpr_cap = 0.3);

struct GeneralizationReport {
    MetricReport synthetic;
    MetricReport real;
};

/// Side-by-side evaluation of a synthetic-origin subset and a real-capture
/// subset with the same predictor.
GeneralizationReport generalization_split_eval(
    const Predictor& predict, const std::vector<const Sample*>& synthetic_set,
    const std::vector<const Sample*>& real_set, const ClassTable& table,
    double fpr_cap = 0.3);

} // namespace pad
