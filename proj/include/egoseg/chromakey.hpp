#pragma once

#include <vector>

#include "egoseg/color.hpp"
#include "egoseg/image.hpp"
#include "egoseg/morphology.hpp"

namespace egoseg {

/// Inclusive HSV box. Hue bounds are degrees with hue_min < hue_max <= 360.
struct ChromaRange {
    float hue_min = 90.0f;
    float hue_max = 150.0f;
    float sat_min = 0.30f;
    float val_min = 0.15f;
    float sat_max = 1.0f;
    float val_max = 1.0f;

    void validate() const {
        require(hue_min >= 0.0f && hue_min < hue_max && hue_max <= 360.0f, ErrorKind::InvalidArgument,
                "chroma range needs 0 <= hue_min < hue_max <= 360");
        require(sat_min >= 0.0f && sat_min <= sat_max && sat_max <= 1.0f, ErrorKind::InvalidArgument,
                "chroma range saturation bounds must satisfy 0 <= sat_min <= sat_max <= 1");
        require(val_min >= 0.0f && val_min <= val_max && val_max <= 1.0f, ErrorKind::InvalidArgument,
                "chroma range value bounds must satisfy 0 <= val_min <= val_max <= 1");
    }

    bool contains(const Hsv& p) const {
        return p.h >= hue_min && p.h <= hue_max && p.s >= sat_min && p.s <= sat_max && p.v >= val_min &&
               p.v <= val_max;
    }
};

inline ChromaRange default_green_range() { return {}; }

/// Skin heuristics: two hue bands (the second wraps around red), ORed together.
inline std::vector<ChromaRange> default_skin_ranges() {
    return {ChromaRange{0.0f, 50.0f, 0.15f, 0.25f, 0.75f, 1.0f}, ChromaRange{340.0f, 360.0f, 0.15f, 0.25f, 0.75f, 1.0f}};
}

inline bool any_contains(const std::vector<ChromaRange>& ranges, const Hsv& p) {
    for (const auto& r : ranges)
        if (r.contains(p)) return true;
    return false;
}

/// Pixels inside the key range are background (0), everything else foreground (1),
/// followed by one radius-1 opening to drop keying speckle.
inline BinaryMask extract_foreground_mask(const ImageRGB8& img, const ChromaRange& range = default_green_range()) {
    range.validate();
    BinaryMask raw(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const auto* p = img.data.data() + i * 3;
        raw.data[i] = range.contains(rgb_to_hsv(p[0], p[1], p[2])) ? 0 : 1;
    }
    return open(raw, StructuringElement(1));
}

/// Skin-colour baseline: in-range pixels are foreground (1). Polarity is the inverse of the keyer.
inline BinaryMask skin_baseline_segment(const ImageRGB8& img, const std::vector<ChromaRange>& ranges) {
    for (const auto& r : ranges) r.validate();
    BinaryMask out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const auto* p = img.data.data() + i * 3;
        out.data[i] = any_contains(ranges, rgb_to_hsv(p[0], p[1], p[2])) ? 1 : 0;
    }
    return out;
}

inline BinaryMask skin_baseline_segment(const ImageRGB8& img, const ChromaRange& range) {
    return skin_baseline_segment(img, std::vector<ChromaRange>{range});
}

} // namespace egoseg
