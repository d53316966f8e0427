#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace pad {

/// RGB image with channel values in [0, 1], stored as three row-major planes.
struct Image {
    int height = 0;
    int width = 0;
    std::array<Eigen::MatrixXd, 3> ch; // r, g, b

    Image() = default;
    Image(int h, int w);
    static Image constant(int h, int w, double r, double g, double b);
    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width;
    }
};

/// Binary mask (0.0 / 1.0 entries).
using Mask = Eigen::MatrixXd;

/// Rec.709 luma of an image.
Eigen::MatrixXd luminance(const Image& img);

/// Interpolation weights mapping a length-`in_size` axis onto `out_size`
/// samples (half-pixel-centre convention; rows sum to 1; identity when
/// sizes match). out(i,j) is the weight of input sample j for output i.
Eigen::MatrixXd bilinear_weight_matrix(int in_size, int out_size);

Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Bilinear resize followed by a 0.5 threshold, keeping the mask binary.
Mask resize_mask(const Mask& mask, int out_h, int out_w);

bool is_binary_mask(const Mask& mask);

} // namespace pad
