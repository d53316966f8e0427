#pragma once

#include "pad/autodiff.hpp"
#include "pad/image.hpp"
#include "pad/prompts.hpp"

#include <utility>
#include <vector>

namespace pad {

struct Predictions {
    Eigen::VectorXd class_probs;              // (K+1) simplex
    std::vector<Eigen::MatrixXd> patch_probs; // (K+1) planes, g_h x g_w, simplex per position
    std::vector<Eigen::MatrixXd> pixel_probs; // (K+1) planes, H x W, simplex per pixel
    Eigen::MatrixXd anomaly_map;              // 1 - pixel_probs[clean]

    int K() const { return static_cast<int>(class_probs.size()) - 1; }
    int predicted_class() const;
};

struct LossBreakdown {
    double cls = 0.0;
    double dice = 0.0;
    double focal = 0.0;
    double lambda = 0.0;
    double total = 0.0;
};

LossBreakdown total_loss(double cls, double dice, double focal, double lambda);

/// Softmax over cosine similarities against unit anchors (temperature 1
/// reproduces the plain formulation). `features` rows need not be unit norm.
Eigen::MatrixXd cosine_softmax(const Eigen::MatrixXd& features, const Eigen::MatrixXd& anchors,
                               double temperature);

/// Tape variant: `features` rows must already be unit norm (F_MG is; pooled
/// image features are normalized inside).
ad::Var cosine_softmax_var(ad::Tape& tape, ad::Var features, ad::Var anchors, double temperature,
                           bool normalize_features);

/// Bilinear per-channel upsampling followed by per-pixel renormalization.
std::vector<Eigen::MatrixXd> upsample_patch_map(const std::vector<Eigen::MatrixXd>& patch_probs,
                                                int out_h, int out_w);

/// Tape variant for pixel-level training losses: splits N x (K+1) token
/// probabilities into per-class grid planes, upsamples each, renormalizes
/// per pixel. N must equal grid_h * grid_w.
std::vector<ad::Var> upsample_token_probs_var(ad::Tape& tape, ad::Var token_probs, int grid_h,
                                              int grid_w, int out_h, int out_w);

/// Shared back half of both prediction paths: reshapes N x (K+1) per-token
/// probabilities onto the patch grid, upsamples, derives the anomaly map.
Predictions assemble_predictions(const Eigen::VectorXd& class_probs,
                                 const Eigen::MatrixXd& token_probs, int grid_h, int grid_w,
                                 int out_h, int out_w);

/// Full scoring path: global + per-token softmax, patch grid reshape,
/// upsample, anomaly map.
Predictions score_against_anchors(const Eigen::MatrixXd& f_image, const Eigen::MatrixXd& f_mg,
                                  const AnchorSet& anchors, double temperature, int grid_h,
                                  int grid_w, int out_h, int out_w);

/// Stage-I linear heads over the shared embedding space.
struct Heads {
    ad::Parameter cls_w, cls_b; // embed x (K+1), 1 x (K+1)
    ad::Parameter seg_w, seg_b;
};

Heads make_heads(int embed_dim, int num_artifact_classes, std::uint64_t seed);

ad::Var classify_head(ad::Tape& tape, ad::Var f_image, Heads& heads); // 1 x (K+1) logits
ad::Var segment_head(ad::Tape& tape, ad::Var f_mg, Heads& heads);    // N x (K+1) logits

/// -log(probs[y]) with the probability clamped at 1e-12.
double classification_loss(const Eigen::VectorXd& probs, int y);
ad::Var classification_loss_var(ad::Tape& tape, ad::Var probs_row, int y);

/// Per-pixel one-hot targets from (mask, class): masked pixels belong to
/// gt_class, the rest to clean. Returns (dice, focal).
std::pair<double, double> segmentation_loss(const std::vector<Eigen::MatrixXd>& pixel_probs,
                                            const Mask& gt_mask, int gt_class,
                                            double focal_gamma = 2.0, double focal_alpha = 0.25,
                                            double dice_epsilon = 1.0);
std::pair<ad::Var, ad::Var> segmentation_loss_var(ad::Tape& tape,
                                                  const std::vector<ad::Var>& pixel_probs,
                                                  const Mask& gt_mask, int gt_class,
                                                  double focal_gamma = 2.0,
                                                  double focal_alpha = 0.25,
                                                  double dice_epsilon = 1.0);

} // namespace pad
