#pragma once

#include "pad/image.hpp"

#include <filesystem>

namespace pad {

/// Reads an 8-bit RGB PNG or JPEG into [0,1] reals.
Image load_image(const std::filesystem::path& path);

/// Writes 8-bit RGB PNG; values are clamped to [0,1] and rounded to /255 steps.
void save_image_png(const Image& img, const std::filesystem::path& path);

/// Reads a single-channel PNG; pixels >= 128 map to 1, the rest to 0.
Mask load_mask(const std::filesystem::path& path);

/// Writes a binary mask as 8-bit grayscale PNG with 0/255 values.
void save_mask_png(const Mask& mask, const std::filesystem::path& path);

/// Writes a [0,1] scalar field as grayscale PNG (value*255, rounded).
void save_gray_png(const Eigen::MatrixXd& values, const std::filesystem::path& path);

} // namespace pad
