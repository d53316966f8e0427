#include "pad/image_io.hpp"

#include "pad/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace pad {

namespace {

std::uint8_t to_u8(double v) {
    const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

} // namespace

Image load_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw DataError("load_image: cannot read " + path.string());
    }
    Image img(bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            img.ch[0](y, x) = row[x][2] / 255.0;
            img.ch[1](y, x) = row[x][1] / 255.0;
            img.ch[2](y, x) = row[x][0] / 255.0;
        }
    }
    return img;
}

void save_image_png(const Image& img, const std::filesystem::path& path) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x][2] = to_u8(img.ch[0](y, x));
            row[x][1] = to_u8(img.ch[1](y, x));
            row[x][0] = to_u8(img.ch[2](y, x));
        }
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw DataError("save_image_png: cannot write " + path.string());
    }
}

Mask load_mask(const std::filesystem::path& path) {
    cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (gray.empty()) {
        throw DataError("load_mask: cannot read " + path.string());
    }
    Mask mask(gray.rows, gray.cols);
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            mask(y, x) = row[x] >= 128 ? 1.0 : 0.0;
        }
    }
    return mask;
}

void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
    cv::Mat gray(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1);
    for (int y = 0; y < mask.rows(); ++y) {
        auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.cols(); ++x) {
            row[x] = mask(y, x) != 0.0 ? 255 : 0;
        }
    }
    if (!cv::imwrite(path.string(), gray)) {
        throw DataError("save_mask_png: cannot write " + path.string());
    }
}

void save_gray_png(const Eigen::MatrixXd& values, const std::filesystem::path& path) {
    cv::Mat gray(static_cast<int>(values.rows()), static_cast<int>(values.cols()), CV_8UC1);
    for (int y = 0; y < values.rows(); ++y) {
        auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < values.cols(); ++x) {
            row[x] = to_u8(values(y, x));
        }
    }
    if (!cv::imwrite(path.string(), gray)) {
        throw DataError("save_gray_png: cannot write " + path.string());
    }
}

} // namespace pad
