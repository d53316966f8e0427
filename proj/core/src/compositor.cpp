#include "pad/compositor.hpp"

#include "pad/errors.hpp"
#include "pad/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace pad {

using nlohmann::json;

void PatternBank::validate(int num_artifact_classes) const {
    for (const auto& e : patterns) {
        if (e.class_id < 1 || e.class_id > num_artifact_classes) {
            throw DataError("PatternBank: pattern class id " + std::to_string(e.class_id) +
                            " outside 1.." + std::to_string(num_artifact_classes));
        }
        for (int c = 0; c < 3; ++c) {
            if ((e.pattern.ch[c].array() < 0.0).any() || (e.pattern.ch[c].array() > 1.0).any()) {
                throw DataError("PatternBank: pattern values outside [0,1]");
            }
        }
    }
    for (const auto& [cls, range] : blend_ranges) {
        if (!(range.first > 0.0 && range.first <= range.second && range.second < 1.0)) {
            throw DataError("PatternBank: blend range for class " + std::to_string(cls) +
                            " must satisfy 0 < lo <= hi < 1");
        }
    }
}

std::vector<const PatternBank::Entry*> PatternBank::for_class(int class_id) const {
    std::vector<const Entry*> out;
    for (const auto& e : patterns) {
        if (e.class_id == class_id) out.push_back(&e);
    }
    return out;
}

std::pair<double, double> PatternBank::blend_range(int class_id) const {
    auto it = blend_ranges.find(class_id);
    if (it == blend_ranges.end()) {
        throw DataError("PatternBank: no blend range for class " + std::to_string(class_id));
    }
    return it->second;
}

PatternBank load_pattern_bank(const std::filesystem::path& dir, const ClassTable& table) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw DataError("load_pattern_bank: not a directory: " + dir.string());
    }
    PatternBank bank;

    std::map<std::string, std::pair<double, double>> declared;
    const fs::path cfg = dir / "bank.json";
    if (fs::exists(cfg)) {
        std::ifstream in(cfg);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError("load_pattern_bank: bad bank.json: " + std::string(e.what()));
        }
        if (j.contains("blend_ranges")) {
            for (auto& [name, range] : j.at("blend_ranges").items()) {
                if (!range.is_array() || range.size() != 2) {
                    throw DataError("load_pattern_bank: blend range for \"" + name +
                                    "\" must be [lo, hi]");
                }
                declared[name] = {range[0].get<double>(), range[1].get<double>()};
            }
        }
    }

    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        auto id = table.id_of(name);
        if (!id || *id == 0) {
            throw DataError("load_pattern_bank: directory \"" + name +
                            "\" does not match an artifact class");
        }
        std::set<fs::path> files; // sorted for deterministic pattern order
        for (const auto& f : fs::directory_iterator(entry.path())) {
            if (f.path().extension() == ".png") files.insert(f.path());
        }
        for (const auto& f : files) {
            bank.patterns.push_back({load_image(f), *id});
        }
        if (auto it = declared.find(name); it != declared.end()) {
            bank.blend_ranges[*id] = it->second;
        } else if (name == "lens_flare") {
            bank.blend_ranges[*id] = {0.6, 0.95};
        } else if (name == "moire") {
            bank.blend_ranges[*id] = {0.3, 0.8};
        } else {
            throw DataError("load_pattern_bank: class \"" + name +
                            "\" has no blend range in bank.json and no built-in default");
        }
    }
    bank.validate(table.K());
    return bank;
}

void CompositeSpec::validate() const {
    if (!clean.same_shape(pattern)) {
        throw DataError("CompositeSpec: clean/pattern shape mismatch");
    }
    if (mask.rows() != clean.height || mask.cols() != clean.width) {
        throw DataError("CompositeSpec: mask shape mismatch");
    }
    if (!is_binary_mask(mask)) {
        throw DataError("CompositeSpec: mask is not binary");
    }
    if (!(phi > 0.0 && phi < 1.0)) {
        throw DataError("CompositeSpec: phi must lie in (0,1)");
    }
}

Image composite(const CompositeSpec& spec) {
    spec.validate();
    Image out = spec.clean;
    for (int c = 0; c < 3; ++c) {
        auto& plane = out.ch[c];
        const auto& gt = spec.clean.ch[c];
        const auto& pat = spec.pattern.ch[c];
        for (int i = 0; i < spec.mask.rows(); ++i) {
            for (int j = 0; j < spec.mask.cols(); ++j) {
                if (spec.mask(i, j) != 0.0) {
                    plane(i, j) = (1.0 - spec.phi) * gt(i, j) + spec.phi * pat(i, j);
                }
            }
        }
    }
    return out;
}

namespace {

struct Centroid {
    double row = 0.0;
    double col = 0.0;
    long count = 0;
};

Centroid mask_centroid(const Mask& m) {
    Centroid c;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (m(i, j) != 0.0) {
                c.row += i;
                c.col += j;
                ++c.count;
            }
        }
    }
    if (c.count > 0) {
        c.row /= static_cast<double>(c.count);
        c.col /= static_cast<double>(c.count);
    }
    return c;
}

struct BBox {
    int top = 0, left = 0, bottom = -1, right = -1; // inclusive
};

BBox mask_bbox(const Mask& m) {
    BBox b{m.rows(), m.cols(), -1, -1};
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (m(i, j) != 0.0) {
                b.top = std::min(b.top, i);
                b.left = std::min(b.left, j);
                b.bottom = std::max(b.bottom, i);
                b.right = std::max(b.right, j);
            }
        }
    }
    return b;
}

} // namespace

std::pair<Image, Mask> place_pattern(const Image& pattern, const Mask& anchor_mask,
                                     int target_height, int target_width, Rng& rng,
                                     double jitter_frac, double tau) {
    if (pattern.height <= 0 || pattern.width <= 0) {
        throw DataError("place_pattern: empty pattern");
    }
    if ((anchor_mask.array() != 0.0).count() == 0) {
        throw DataError("place_pattern: empty anchor mask");
    }
    if (anchor_mask.rows() != target_height || anchor_mask.cols() != target_width) {
        throw DataError("place_pattern: anchor mask does not match target size");
    }

    // Shrink to fit the frame; never upscale.
    const double scale = std::min(
        1.0, std::min(static_cast<double>(target_height) / pattern.height,
                      static_cast<double>(target_width) / pattern.width));
    Image scaled = pattern;
    if (scale < 1.0) {
        const int h = std::max(1, static_cast<int>(std::floor(pattern.height * scale)));
        const int w = std::max(1, static_cast<int>(std::floor(pattern.width * scale)));
        scaled = resize_bilinear(pattern, h, w);
    }

    const Mask support = (luminance(scaled).array() > tau).cast<double>();
    Centroid pc = mask_centroid(support);
    if (pc.count == 0) {
        // Fully dark pattern: fall back to the geometric centre so placement
        // is still defined; the resulting placement mask will be empty.
        pc.row = (scaled.height - 1) / 2.0;
        pc.col = (scaled.width - 1) / 2.0;
    }

    const Centroid ac = mask_centroid(anchor_mask);
    const BBox bb = mask_bbox(anchor_mask);
    double ty = ac.row;
    double tx = ac.col;
    if (jitter_frac > 0.0) {
        const double bh = bb.bottom - bb.top;
        const double bw = bb.right - bb.left;
        ty += rng.uniform(-0.5, 0.5) * jitter_frac * bh;
        tx += rng.uniform(-0.5, 0.5) * jitter_frac * bw;
        ty = std::clamp(ty, static_cast<double>(bb.top), static_cast<double>(bb.bottom));
        tx = std::clamp(tx, static_cast<double>(bb.left), static_cast<double>(bb.right));
    }

    int top = static_cast<int>(std::lround(ty - pc.row));
    int left = static_cast<int>(std::lround(tx - pc.col));
    top = std::clamp(top, 0, target_height - scaled.height);
    left = std::clamp(left, 0, target_width - scaled.width);

    Image placed = Image::constant(target_height, target_width, 0.0, 0.0, 0.0);
    for (int c = 0; c < 3; ++c) {
        placed.ch[c].block(top, left, scaled.height, scaled.width) = scaled.ch[c];
    }
    Mask placed_mask = Mask::Zero(target_height, target_width);
    placed_mask.block(top, left, scaled.height, scaled.width) = support;
    return {std::move(placed), std::move(placed_mask)};
}

Sample synthesize_sample(const Sample& clean, const PatternBank& bank, int class_id,
                         const Mask& anchor_mask, Rng& rng, double jitter_frac) {
    if (clean.class_id != 0) {
        throw DataError("synthesize_sample: base sample must be clean (class 0)");
    }
    auto candidates = bank.for_class(class_id);
    if (candidates.empty()) {
        throw DataError("synthesize_sample: no pattern for class " + std::to_string(class_id));
    }
    const auto [phi_min, phi_max] = bank.blend_range(class_id);

    const int idx = rng.uniform_int(0, static_cast<int>(candidates.size()) - 1);
    const double phi = rng.uniform(phi_min, phi_max);
    auto [placed, mask] =
        place_pattern(candidates[static_cast<std::size_t>(idx)]->pattern, anchor_mask,
                      clean.image.height, clean.image.width, rng, jitter_frac);
    if ((mask.array() != 0.0).count() == 0) {
        throw DataError("synthesize_sample: placement produced an empty mask");
    }

    Sample out;
    out.id = clean.id + "-synth-" + std::to_string(class_id);
    out.image_path = clean.image_path;
    out.class_id = class_id;
    out.origin = Origin::synthetic;
    out.phi = phi;
    out.object_name = clean.object_name;
    out.mask = std::move(mask);
    out.image = composite({clean.image, std::move(placed), out.mask, phi});
    return out;
}

} // namespace pad
