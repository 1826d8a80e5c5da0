#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "egoseg/color.hpp"
#include "egoseg/geometry.hpp"
#include "egoseg/image.hpp"
#include "egoseg/rng.hpp"

namespace egoseg {

struct AugmentConfig {
    bool enable_chromatic = true;
    bool enable_crop = true;
    double brightness_delta = 20.0; // additive, 0-255 units, drawn in [-d, d]
    double contrast_min = 0.8;
    double contrast_max = 1.2;
    double saturation_min = 0.8;
    double saturation_max = 1.2;
    double hue_delta_deg = 8.0;
    double crop_fraction = 0.75; // side fraction drawn in [crop_fraction, 1]
    std::uint64_t seed = 0;

    void validate() const {
        require(brightness_delta >= 0 && hue_delta_deg >= 0, ErrorKind::InvalidArgument,
                "augment brightness_delta and hue_delta_deg must be >= 0");
        require(contrast_min > 0 && contrast_min <= contrast_max, ErrorKind::InvalidArgument,
                "augment contrast range must satisfy 0 < min <= max");
        require(saturation_min >= 0 && saturation_min <= saturation_max, ErrorKind::InvalidArgument,
                "augment saturation range must satisfy 0 <= min <= max");
        require(crop_fraction >= 0.5 && crop_fraction <= 1.0, ErrorKind::InvalidArgument,
                "augment crop_fraction must lie in [0.5, 1]");
    }
};

/// One concrete draw of the chromatic jitter.
struct ChromaticJitter {
    double brightness = 0.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue_shift_deg = 0.0;
};

/// Brightness add, contrast about the image mean, then saturation scale and hue shift in HSV.
/// The HSV pass is skipped when it would be the identity, so neutral jitter is exact.
inline ImageRGB8 apply_chromatic(const ImageRGB8& img, const ChromaticJitter& j) {
    const std::size_t n = img.data.size();
    std::vector<double> v(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = img.data[i] + j.brightness;
        mean += v[i];
    }
    mean /= static_cast<double>(n);
    if (j.contrast != 1.0)
        for (auto& x : v) x = mean + (x - mean) * j.contrast;
    ImageRGB8 out(img.width, img.height);
    const bool hsv_pass = j.saturation != 1.0 || j.hue_shift_deg != 0.0;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        double r = std::clamp(v[p * 3] / 255.0, 0.0, 1.0);
        double g = std::clamp(v[p * 3 + 1] / 255.0, 0.0, 1.0);
        double b = std::clamp(v[p * 3 + 2] / 255.0, 0.0, 1.0);
        if (hsv_pass) {
            Hsv h = rgb_to_hsv(static_cast<float>(r), static_cast<float>(g), static_cast<float>(b));
            h.s = static_cast<float>(std::clamp(h.s * j.saturation, 0.0, 1.0));
            h.h = static_cast<float>(std::fmod(h.h + j.hue_shift_deg + 360.0, 360.0));
            const Rgbf c = hsv_to_rgb(h);
            r = c.r, g = c.g, b = c.b;
        }
        out.data[p * 3] = to_byte(r);
        out.data[p * 3 + 1] = to_byte(g);
        out.data[p * 3 + 2] = to_byte(b);
    }
    return out;
}

struct CropBox {
    int x = 0, y = 0, w = 0, h = 0;
};

template <class Mask>
struct Augmented {
    ImageRGB8 image;
    Mask mask;
};

/// Chromatic jitter on the image only; one random crop applied identically to image and mask,
/// resized back (bilinear for the image, nearest for the mask so its value set is preserved).
template <class Mask>
Augmented<Mask> augment(const ImageRGB8& img, const Mask& mask, const AugmentConfig& cfg, Rng& draw) {
    cfg.validate();
    require(img.width == mask.width && img.height == mask.height, ErrorKind::InvalidArgument,
            "augment: image " + dims_string(img.width, img.height) + " and mask " +
                dims_string(mask.width, mask.height) + " differ");
    Augmented<Mask> out{img, mask};
    if (cfg.enable_chromatic) {
        ChromaticJitter j;
        j.brightness = draw.uniform(-cfg.brightness_delta, cfg.brightness_delta);
        j.contrast = draw.uniform(cfg.contrast_min, cfg.contrast_max);
        j.saturation = draw.uniform(cfg.saturation_min, cfg.saturation_max);
        j.hue_shift_deg = draw.uniform(-cfg.hue_delta_deg, cfg.hue_delta_deg);
        out.image = apply_chromatic(out.image, j);
    }
    if (cfg.enable_crop) {
        const double f = draw.uniform(cfg.crop_fraction, 1.0);
        CropBox box;
        box.w = std::clamp(static_cast<int>(std::lround(f * img.width)), 1, img.width);
        box.h = std::clamp(static_cast<int>(std::lround(f * img.height)), 1, img.height);
        box.x = static_cast<int>(draw.uniform_int(0, img.width - box.w));
        box.y = static_cast<int>(draw.uniform_int(0, img.height - box.h));
        if (box.w != img.width || box.h != img.height) {
            out.image = resize_bilinear(crop(out.image, box.x, box.y, box.w, box.h), img.width, img.height);
            out.mask = resize_nearest(crop(out.mask, box.x, box.y, box.w, box.h), img.width, img.height);
        }
    }
    return out;
}

} // namespace egoseg
