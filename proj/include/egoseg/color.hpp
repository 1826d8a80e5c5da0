#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "egoseg/image.hpp"

namespace egoseg {

struct Hsv {
    float h = 0.0f; // degrees [0,360)
    float s = 0.0f;
    float v = 0.0f;
};

struct Rgbf {
    float r = 0.0f;
    float g = 0.0f;
    float b = 0.0f;
};

inline Hsv rgb_to_hsv(float r, float g, float b) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) return out; // achromatic: hue 0 by convention
    float h;
    if (mx == r)
        h = 60.0f * std::fmod((g - b) / d, 6.0f);
    else if (mx == g)
        h = 60.0f * ((b - r) / d + 2.0f);
    else
        h = 60.0f * ((r - g) / d + 4.0f);
    if (h < 0.0f) h += 360.0f;
    if (h >= 360.0f) h -= 360.0f;
    out.h = h;
    return out;
}

inline Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return rgb_to_hsv(to_unit(r), to_unit(g), to_unit(b));
}

inline Rgbf hsv_to_rgb(Hsv p) {
    const float h = std::fmod(std::fmod(p.h, 360.0f) + 360.0f, 360.0f);
    const float c = p.v * p.s;
    const float hp = h / 60.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
    }
    const float m = p.v - c;
    return {r + m, g + m, b + m};
}

/// Planar H,S,V output with the input's dimensions.
inline ImageF32 rgb_to_hsv(const ImageRGB8& img) {
    ImageF32 out(img.width, img.height, 3);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const auto* p = img.data.data() + i * 3;
        const Hsv hsv = rgb_to_hsv(p[0], p[1], p[2]);
        out.data[i] = hsv.h;
        out.data[n + i] = hsv.s;
        out.data[2 * n + i] = hsv.v;
    }
    return out;
}

inline ImageRGB8 hsv_to_rgb(const ImageF32& hsv) {
    require(hsv.channels == 3, ErrorKind::InvalidArgument, "hsv_to_rgb needs 3 channels");
    ImageRGB8 out(hsv.width, hsv.height);
    const std::size_t n = hsv.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        const Rgbf c = hsv_to_rgb(Hsv{hsv.data[i], hsv.data[n + i], hsv.data[2 * n + i]});
        out.data[i * 3 + 0] = to_byte(c.r);
        out.data[i * 3 + 1] = to_byte(c.g);
        out.data[i * 3 + 2] = to_byte(c.b);
    }
    return out;
}

} // namespace egoseg
