#include "pad/image.hpp"

#include "pad/errors.hpp"

#include <cmath>

namespace pad {

Image::Image(int h, int w) : height(h), width(w) {
    for (auto& plane : ch) {
        plane = Eigen::MatrixXd::Zero(h, w);
    }
}

Image Image::constant(int h, int w, double r, double g, double b) {
    Image img(h, w);
    img.ch[0].setConstant(r);
    img.ch[1].setConstant(g);
    img.ch[2].setConstant(b);
    return img;
}

Eigen::MatrixXd luminance(const Image& img) {
    return 0.2126 * img.ch[0] + 0.7152 * img.ch[1] + 0.0722 * img.ch[2];
}

Eigen::MatrixXd bilinear_weight_matrix(int in_size, int out_size) {
    if (in_size < 1 || out_size < 1) {
        throw Error("bilinear_weight_matrix: degenerate size");
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out_size, in_size);
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    for (int i = 0; i < out_size; ++i) {
        double src = (i + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > in_size - 1.0) src = in_size - 1.0;
        const int lo = static_cast<int>(std::floor(src));
        const int hi = std::min(lo + 1, in_size - 1);
        const double frac = src - lo;
        w(i, lo) += 1.0 - frac;
        w(i, hi) += frac;
    }
    return w;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (img.height == out_h && img.width == out_w) {
        return img;
    }
    const Eigen::MatrixXd wr = bilinear_weight_matrix(img.height, out_h);
    const Eigen::MatrixXd wc = bilinear_weight_matrix(img.width, out_w);
    Image out(out_h, out_w);
    for (int c = 0; c < 3; ++c) {
        out.ch[c] = wr * img.ch[c] * wc.transpose();
    }
    return out;
}

Mask resize_mask(const Mask& mask, int out_h, int out_w) {
    if (mask.rows() == out_h && mask.cols() == out_w) {
        return mask;
    }
    const Eigen::MatrixXd wr = bilinear_weight_matrix(static_cast<int>(mask.rows()), out_h);
    const Eigen::MatrixXd wc = bilinear_weight_matrix(static_cast<int>(mask.cols()), out_w);
    Eigen::MatrixXd soft = wr * mask * wc.transpose();
    return (soft.array() >= 0.5).cast<double>();
}

bool is_binary_mask(const Mask& mask) {
    return ((mask.array() == 0.0) || (mask.array() == 1.0)).all();
}

} // namespace pad
