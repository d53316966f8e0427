#pragma once

#include "pad/image.hpp"
#include "pad/manifest.hpp"
#include "pad/rng.hpp"

#include <filesystem>
#include <map>
#include <utility>
#include <vector>

namespace pad {

// Luminance threshold above which a placed pattern pixel counts as support.
inline constexpr double kSupportThreshold = 0.05;

struct PatternBank {
    struct Entry {
        Image pattern; // values in [0,1]
        int class_id = 0;
    };
    std::vector<Entry> patterns;
    // class id -> [phi_min, phi_max], both in (0,1)
    std::map<int, std::pair<double, double>> blend_ranges;

    void validate(int num_artifact_classes) const;
    std::vector<const Entry*> for_class(int class_id) const;
    std::pair<double, double> blend_range(int class_id) const;
};

// Bank directory layout: one subdirectory per artifact class name holding PNG
// patterns, plus an optional bank.json declaring {"blend_ranges": {name: [lo, hi]}}.
// lens_flare and moire fall back to built-in ranges; other classes must be declared.
PatternBank load_pattern_bank(const std::filesystem::path& dir, const ClassTable& table);

struct CompositeSpec {
    Image clean;   // I_gt
    Image pattern; // N, already placed at target resolution
    Mask mask;     // M, binary
    double phi = 0.5;

    void validate() const;
};

// Blend: out = (1-M) * clean + M * ((1-phi) * clean + phi * pattern).
// Pixels with M == 0 are copied from clean untouched (exact identity).
Image composite(const CompositeSpec& spec);

// Scales the pattern down if it exceeds the target frame, then translates it so
// its support centroid lands on the anchor-mask centroid (optionally jittered
// within the anchor bounding box by jitter_frac of its extent). Returns the
// placed pattern on a black canvas and the support mask (luminance > tau).
std::pair<Image, Mask> place_pattern(const Image& pattern, const Mask& anchor_mask,
                                     int target_height, int target_width, Rng& rng,
                                     double jitter_frac = 0.0,
                                     double tau = kSupportThreshold);

Sample synthesize_sample(const Sample& clean, const PatternBank& bank, int class_id,
                         const Mask& anchor_mask, Rng& rng, double jitter_frac = 0.0);

} // namespace pad
