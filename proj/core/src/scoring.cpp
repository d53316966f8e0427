#include "pad/scoring.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <algorithm>
#include <cmath>

namespace pad {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::MatrixXd gaussian(Rng rng, int rows, int cols, double sigma) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = sigma * rng.normal();
        }
    }
    return m;
}

// One-hot pixel targets: masked pixels carry gt_class, the rest clean.
std::vector<Eigen::MatrixXd> pixel_targets(const Mask& gt_mask, int gt_class, int num_classes) {
    if (gt_class < 0 || gt_class >= num_classes) {
        throw DataError("segmentation targets: class " + std::to_string(gt_class) +
                        " outside 0.." + std::to_string(num_classes - 1));
    }
    const bool mask_empty = (gt_mask.array() != 0.0).count() == 0;
    if (gt_class == 0 && !mask_empty) {
        throw DataError("segmentation targets: clean class with nonzero mask");
    }
    if (gt_class != 0 && mask_empty) {
        throw DataError("segmentation targets: artifact class with empty mask");
    }
    std::vector<Eigen::MatrixXd> t(static_cast<std::size_t>(num_classes),
                                   Eigen::MatrixXd::Zero(gt_mask.rows(), gt_mask.cols()));
    t[0] = Eigen::MatrixXd::Ones(gt_mask.rows(), gt_mask.cols()) - gt_mask;
    if (gt_class != 0) t[static_cast<std::size_t>(gt_class)] = gt_mask;
    return t;
}

} // namespace

int Predictions::predicted_class() const {
    Eigen::Index best = 0;
    class_probs.maxCoeff(&best);
    return static_cast<int>(best);
}

LossBreakdown total_loss(double cls, double dice, double focal, double lambda) {
    if (lambda < 0.0) throw DataError("total_loss: lambda must be >= 0");
    LossBreakdown b;
    b.cls = cls;
    b.dice = dice;
    b.focal = focal;
    b.lambda = lambda;
    b.total = lambda * cls + dice + focal;
    return b;
}

Eigen::MatrixXd cosine_softmax(const Eigen::MatrixXd& features, const Eigen::MatrixXd& anchors,
                               double temperature) {
    if (temperature <= 0.0) throw DataError("cosine_softmax: temperature must be > 0");
    if (features.cols() != anchors.cols()) {
        throw DataError("cosine_softmax: feature dim " + std::to_string(features.cols()) +
                        " vs anchor dim " + std::to_string(anchors.cols()));
    }
    Eigen::MatrixXd out(features.rows(), anchors.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double fn = features.row(i).norm();
        for (Eigen::Index c = 0; c < anchors.rows(); ++c) {
            const double an = anchors.row(c).norm();
            const double denom = std::max(fn * an, 1e-24);
            out(i, c) = features.row(i).dot(anchors.row(c)) / denom / temperature;
        }
        const double m = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

ad::Var cosine_softmax_var(ad::Tape& tape, ad::Var features, ad::Var anchors, double temperature,
                           bool normalize_features) {
    if (temperature <= 0.0) throw DataError("cosine_softmax: temperature must be > 0");
    if (features.cols() != anchors.cols()) {
        throw DataError("cosine_softmax: feature/anchor dim mismatch");
    }
    ad::Var f = normalize_features ? tape.l2_normalize_rows(features) : features;
    return tape.softmax_rows(tape.scale(tape.matmul(f, tape.transpose(anchors)), 1.0 / temperature));
}

std::vector<Eigen::MatrixXd> upsample_patch_map(const std::vector<Eigen::MatrixXd>& patch_probs,
                                                int out_h, int out_w) {
    if (patch_probs.empty()) throw DataError("upsample_patch_map: no channels");
    if (out_h < 1 || out_w < 1) throw DataError("upsample_patch_map: degenerate target size");
    const Eigen::Index gh = patch_probs[0].rows();
    const Eigen::Index gw = patch_probs[0].cols();
    if (gh < 1 || gw < 1) throw DataError("upsample_patch_map: degenerate patch grid");

    const Eigen::MatrixXd wr = bilinear_weight_matrix(static_cast<int>(gh), out_h);
    const Eigen::MatrixXd wc = bilinear_weight_matrix(static_cast<int>(gw), out_w);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(patch_probs.size());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(out_h, out_w);
    for (const auto& plane : patch_probs) {
        if (plane.rows() != gh || plane.cols() != gw) {
            throw DataError("upsample_patch_map: channel shape mismatch");
        }
        out.push_back(wr * plane * wc.transpose());
        total += out.back();
    }
    for (auto& plane : out) {
        plane.array() /= total.array().max(1e-24);
    }
    return out;
}

std::vector<ad::Var> upsample_token_probs_var(ad::Tape& tape, ad::Var token_probs, int grid_h,
                                              int grid_w, int out_h, int out_w) {
    if (token_probs.rows() != grid_h * grid_w) {
        throw DataError("upsample_token_probs_var: token count does not match the patch grid");
    }
    if (out_h < 1 || out_w < 1) {
        throw DataError("upsample_token_probs_var: degenerate target size");
    }
    const int num_classes = token_probs.cols();
    std::vector<ad::Var> planes;
    planes.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        ad::Var grid = tape.reshape_rowmajor(tape.cols(token_probs, c, 1), grid_h, grid_w);
        planes.push_back(tape.upsample_bilinear(grid, out_h, out_w));
    }
    // Bilinear weights are shared across classes, so the planes still sum to
    // one per pixel; the division only trims floating-point drift.
    ad::Var total = planes[0];
    for (int c = 1; c < num_classes; ++c) total = tape.add(total, planes[c]);
    std::vector<ad::Var> out;
    out.reserve(planes.size());
    for (int c = 0; c < num_classes; ++c) out.push_back(tape.div(planes[c], total));
    return out;
}

Predictions assemble_predictions(const Eigen::VectorXd& class_probs,
                                 const Eigen::MatrixXd& token_probs, int grid_h, int grid_w,
                                 int out_h, int out_w) {
    if (token_probs.rows() != static_cast<Eigen::Index>(grid_h) * grid_w) {
        throw DataError("assemble_predictions: token count does not match the patch grid");
    }
    if (token_probs.cols() != class_probs.size()) {
        throw DataError("assemble_predictions: class count mismatch");
    }
    Predictions pred;
    pred.class_probs = class_probs;

    const int num_classes = static_cast<int>(class_probs.size());
    pred.patch_probs.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        Eigen::MatrixXd plane(grid_h, grid_w);
        for (int i = 0; i < grid_h; ++i) {
            for (int j = 0; j < grid_w; ++j) {
                plane(i, j) = token_probs(static_cast<Eigen::Index>(i) * grid_w + j, c);
            }
        }
        pred.patch_probs.push_back(std::move(plane));
    }
    pred.pixel_probs = upsample_patch_map(pred.patch_probs, out_h, out_w);
    pred.anomaly_map = Eigen::MatrixXd::Ones(out_h, out_w) - pred.pixel_probs[0];
    return pred;
}

Predictions score_against_anchors(const Eigen::MatrixXd& f_image, const Eigen::MatrixXd& f_mg,
                                  const AnchorSet& anchors, double temperature, int grid_h,
                                  int grid_w, int out_h, int out_w) {
    const Eigen::VectorXd y =
        cosine_softmax(f_image, anchors.anchors, temperature).row(0).transpose();
    const Eigen::MatrixXd token_probs = cosine_softmax(f_mg, anchors.anchors, temperature);
    return assemble_predictions(y, token_probs, grid_h, grid_w, out_h, out_w);
}

Heads make_heads(int embed_dim, int num_artifact_classes, std::uint64_t seed) {
    if (num_artifact_classes < 1) throw DataError("make_heads: need at least one artifact class");
    const int c = num_artifact_classes + 1;
    Rng root(seed);
    Heads h;
    h.cls_w = ad::Parameter("head.cls.w", gaussian(root.split("head/cls/w"), embed_dim, c, 0.02));
    h.cls_b = ad::Parameter("head.cls.b", Eigen::MatrixXd::Zero(1, c));
    h.seg_w = ad::Parameter("head.seg.w", gaussian(root.split("head/seg/w"), embed_dim, c, 0.02));
    h.seg_b = ad::Parameter("head.seg.b", Eigen::MatrixXd::Zero(1, c));
    return h;
}

ad::Var classify_head(ad::Tape& tape, ad::Var f_image, Heads& heads) {
    if (f_image.cols() != heads.cls_w.value.rows()) {
        throw DataError("classify_head: embed dim mismatch");
    }
    return tape.add_rowvec(tape.matmul(f_image, tape.leaf(heads.cls_w)), tape.leaf(heads.cls_b));
}

ad::Var segment_head(ad::Tape& tape, ad::Var f_mg, Heads& heads) {
    if (f_mg.cols() != heads.seg_w.value.rows()) {
        throw DataError("segment_head: embed dim mismatch");
    }
    return tape.add_rowvec(tape.matmul(f_mg, tape.leaf(heads.seg_w)), tape.leaf(heads.seg_b));
}

double classification_loss(const Eigen::VectorXd& probs, int y) {
    if (y < 0 || y >= probs.size()) {
        throw DataError("classification_loss: label " + std::to_string(y) + " out of range");
    }
    return -std::log(std::max(probs(y), kProbFloor));
}

ad::Var classification_loss_var(ad::Tape& tape, ad::Var probs_row, int y) {
    if (probs_row.rows() != 1) throw DataError("classification_loss: expected a 1-row vector");
    if (y < 0 || y >= probs_row.cols()) {
        throw DataError("classification_loss: label " + std::to_string(y) + " out of range");
    }
    return tape.scale(tape.log_clamped(tape.cols(probs_row, y, 1), kProbFloor), -1.0);
}

std::pair<double, double> segmentation_loss(const std::vector<Eigen::MatrixXd>& pixel_probs,
                                            const Mask& gt_mask, int gt_class, double focal_gamma,
                                            double focal_alpha, double dice_epsilon) {
    if (pixel_probs.empty()) throw DataError("segmentation_loss: no channels");
    if (pixel_probs[0].rows() != gt_mask.rows() || pixel_probs[0].cols() != gt_mask.cols()) {
        throw DataError("segmentation_loss: mask/probability shape mismatch");
    }
    const int num_classes = static_cast<int>(pixel_probs.size());
    const auto targets = pixel_targets(gt_mask, gt_class, num_classes);

    double dice_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        const auto& p = pixel_probs[static_cast<std::size_t>(c)];
        const auto& t = targets[static_cast<std::size_t>(c)];
        const double overlap = (p.array() * t.array()).sum();
        const double denom = p.sum() + t.sum();
        dice_sum += (2.0 * overlap + dice_epsilon) / (denom + dice_epsilon);
    }
    const double dice = 1.0 - dice_sum / num_classes;

    Eigen::MatrixXd p_t = Eigen::MatrixXd::Zero(gt_mask.rows(), gt_mask.cols());
    for (int c = 0; c < num_classes; ++c) {
        p_t.array() += pixel_probs[static_cast<std::size_t>(c)].array() *
                       targets[static_cast<std::size_t>(c)].array();
    }
    double focal_acc = 0.0;
    for (Eigen::Index i = 0; i < p_t.rows(); ++i) {
        for (Eigen::Index j = 0; j < p_t.cols(); ++j) {
            const double p = p_t(i, j);
            focal_acc += std::pow(1.0 - p, focal_gamma) * std::log(std::max(p, kProbFloor));
        }
    }
    const double focal = -focal_alpha * focal_acc / static_cast<double>(p_t.size());
    return {dice, focal};
}

std::pair<ad::Var, ad::Var> segmentation_loss_var(ad::Tape& tape,
                                                  const std::vector<ad::Var>& pixel_probs,
                                                  const Mask& gt_mask, int gt_class,
                                                  double focal_gamma, double focal_alpha,
                                                  double dice_epsilon) {
    if (pixel_probs.empty()) throw DataError("segmentation_loss: no channels");
    if (pixel_probs[0].rows() != gt_mask.rows() || pixel_probs[0].cols() != gt_mask.cols()) {
        throw DataError("segmentation_loss: mask/probability shape mismatch");
    }
    const int num_classes = static_cast<int>(pixel_probs.size());
    const auto targets = pixel_targets(gt_mask, gt_class, num_classes);

    ad::Var dice_terms;
    ad::Var p_t;
    for (int c = 0; c < num_classes; ++c) {
        const auto& p = pixel_probs[static_cast<std::size_t>(c)];
        ad::Var t = tape.constant(targets[static_cast<std::size_t>(c)]);
        ad::Var masked = tape.mul(p, t);
        ad::Var overlap = tape.sum(masked);
        ad::Var denom = tape.add_scalar(tape.sum(p),
                                        targets[static_cast<std::size_t>(c)].sum() + dice_epsilon);
        ad::Var term = tape.div(tape.add_scalar(tape.scale(overlap, 2.0), dice_epsilon), denom);
        dice_terms = dice_terms.valid() ? tape.add(dice_terms, term) : term;
        p_t = p_t.valid() ? tape.add(p_t, masked) : masked;
    }
    ad::Var dice = tape.add_scalar(tape.scale(dice_terms, -1.0 / num_classes), 1.0);

    ad::Var one_minus = tape.sub(tape.constant(Eigen::MatrixXd::Ones(gt_mask.rows(), gt_mask.cols())),
                                 p_t);
    ad::Var focal_map = tape.mul(tape.pow_scalar(one_minus, focal_gamma),
                                 tape.log_clamped(p_t, kProbFloor));
    ad::Var focal = tape.scale(tape.mean(focal_map), -focal_alpha);
    return {dice, focal};
}

} // namespace pad
