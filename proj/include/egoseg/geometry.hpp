#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "egoseg/image.hpp"

namespace egoseg {

namespace detail {

// Half-pixel-center source coordinate, clamped to the valid sample range.
struct Tap {
    int i0;
    int i1;
    float t;
};

inline Tap bilinear_tap(int dst, int dst_len, int src_len) {
    const double scale = static_cast<double>(src_len) / dst_len;
    double s = (dst + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src_len - 1);
    return {i0, i1, static_cast<float>(s - i0)};
}

inline std::vector<Tap> taps(int dst_len, int src_len) {
    std::vector<Tap> out(dst_len);
    for (int i = 0; i < dst_len; ++i) out[i] = bilinear_tap(i, dst_len, src_len);
    return out;
}

} // namespace detail

inline ImageF32 resize_bilinear(const ImageF32& img, int w, int h) {
    require(w >= 1 && h >= 1, ErrorKind::InvalidArgument, "resize target must be >= 1x1");
    ImageF32 out(w, h, img.channels);
    const auto tx = detail::taps(w, img.width);
    const auto ty = detail::taps(h, img.height);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            const auto& a = ty[y];
            for (int x = 0; x < w; ++x) {
                const auto& b = tx[x];
                const float top = img.at(c, b.i0, a.i0) * (1 - b.t) + img.at(c, b.i1, a.i0) * b.t;
                const float bot = img.at(c, b.i0, a.i1) * (1 - b.t) + img.at(c, b.i1, a.i1) * b.t;
                out.at(c, x, y) = top * (1 - a.t) + bot * a.t;
            }
        }
    }
    return out;
}

inline ImageRGB8 resize_bilinear(const ImageRGB8& img, int w, int h) {
    require(w >= 1 && h >= 1, ErrorKind::InvalidArgument, "resize target must be >= 1x1");
    if (w == img.width && h == img.height) return img;
    ImageRGB8 out(w, h);
    const auto tx = detail::taps(w, img.width);
    const auto ty = detail::taps(h, img.height);
    for (int y = 0; y < h; ++y) {
        const auto& a = ty[y];
        for (int x = 0; x < w; ++x) {
            const auto& b = tx[x];
            for (int c = 0; c < 3; ++c) {
                const float top = img.px(b.i0, a.i0)[c] * (1 - b.t) + img.px(b.i1, a.i0)[c] * b.t;
                const float bot = img.px(b.i0, a.i1)[c] * (1 - b.t) + img.px(b.i1, a.i1)[c] * b.t;
                out.px(x, y)[c] = static_cast<std::uint8_t>(
                    std::clamp(std::floor(top * (1 - a.t) + bot * a.t + 0.5f), 0.0f, 255.0f));
            }
        }
    }
    return out;
}

/// Nearest-neighbour resize for label-like planes (keeps the value set unchanged).
template <class T, class Tag>
Plane<T, Tag> resize_nearest(const Plane<T, Tag>& m, int w, int h) {
    require(w >= 1 && h >= 1, ErrorKind::InvalidArgument, "resize target must be >= 1x1");
    Plane<T, Tag> out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * m.height / h), m.height - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * m.width / w), m.width - 1);
            out.at(x, y) = m.at(sx, sy);
        }
    }
    return out;
}

namespace detail {

inline void check_crop(int iw, int ih, int x, int y, int w, int h) {
    require(w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= iw && y + h <= ih, ErrorKind::InvalidArgument,
            "crop rectangle (" + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(w) + "," +
                std::to_string(h) + ") is outside the " + dims_string(iw, ih) + " image");
}

} // namespace detail

inline ImageRGB8 crop(const ImageRGB8& img, int x, int y, int w, int h) {
    detail::check_crop(img.width, img.height, x, y, w, h);
    ImageRGB8 out(w, h);
    for (int r = 0; r < h; ++r) std::copy_n(img.px(x, y + r), static_cast<std::size_t>(w) * 3, out.px(0, r));
    return out;
}

inline ImageF32 crop(const ImageF32& img, int x, int y, int w, int h) {
    detail::check_crop(img.width, img.height, x, y, w, h);
    ImageF32 out(w, h, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int r = 0; r < h; ++r)
            for (int i = 0; i < w; ++i) out.at(c, i, r) = img.at(c, x + i, y + r);
    return out;
}

template <class T, class Tag>
Plane<T, Tag> crop(const Plane<T, Tag>& m, int x, int y, int w, int h) {
    detail::check_crop(m.width, m.height, x, y, w, h);
    Plane<T, Tag> out(w, h);
    for (int r = 0; r < h; ++r)
        for (int i = 0; i < w; ++i) out.at(i, r) = m.at(x + i, y + r);
    return out;
}

/// Counter-clockwise quarter turn; output is height x width.
inline ImageRGB8 rotate90(const ImageRGB8& img) {
    ImageRGB8 out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) std::copy_n(img.px(x, y), 3, out.px(y, img.width - 1 - x));
    return out;
}

inline ImageRGB8 rotate180(const ImageRGB8& img) {
    ImageRGB8 out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            std::copy_n(img.px(x, y), 3, out.px(img.width - 1 - x, img.height - 1 - y));
    return out;
}

/// Largest axis-aligned rectangle inside a w x h rectangle rotated by `radians`.
inline std::pair<int, int> inscribed_rect(int w, int h, double radians) {
    const double s = std::fabs(std::sin(radians));
    const double c = std::fabs(std::cos(radians));
    const bool wide = w >= h;
    const double lo = wide ? h : w;
    const double hi = wide ? w : h;
    double rw, rh;
    if (lo <= 2.0 * s * c * hi || std::fabs(s - c) < 1e-10) {
        const double x = 0.5 * lo;
        rw = wide ? x / s : x / c;
        rh = wide ? x / c : x / s;
    } else {
        const double c2 = c * c - s * s;
        rw = (w * c - h * s) / c2;
        rh = (h * c - w * s) / c2;
    }
    return {std::max(1, static_cast<int>(std::floor(rw + 1e-9))), std::max(1, static_cast<int>(std::floor(rh + 1e-9)))};
}

namespace detail {

// Counter-clockwise rotation about the image centre, bilinear, framed to the inscribed rectangle.
// Samples that would fall outside the source are written as 0.
inline ImageRGB8 rotate_inscribed(const ImageRGB8& img, double degrees) {
    const double rad = degrees * std::numbers::pi / 180.0;
    const auto [ow, oh] = inscribed_rect(img.width, img.height, rad);
    ImageRGB8 out(ow, oh);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    const double ocx = (ow - 1) / 2.0, ocy = (oh - 1) / 2.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    constexpr double eps = 1e-6;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            // Image y points down, so a counter-clockwise turn on screen maps back with this inverse.
            const double dx = x - ocx, dy = y - ocy;
            double sx = cx + cs * dx - sn * dy;
            double sy = cy + sn * dx + cs * dy;
            if (sx < -eps || sy < -eps || sx > img.width - 1 + eps || sy > img.height - 1 + eps) continue;
            sx = std::clamp(sx, 0.0, img.width - 1.0);
            sy = std::clamp(sy, 0.0, img.height - 1.0);
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
            const double tx = sx - x0, ty = sy - y0;
            for (int c = 0; c < 3; ++c) {
                const double top = img.px(x0, y0)[c] * (1 - tx) + img.px(x1, y0)[c] * tx;
                const double bot = img.px(x0, y1)[c] * (1 - tx) + img.px(x1, y1)[c] * tx;
                out.px(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::floor(top * (1 - ty) + bot * ty + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

} // namespace detail

/// Background rotation augmentation. Supported angles: 45, 90, 180 (counter-clockwise).
inline ImageRGB8 rotate(const ImageRGB8& img, int degrees) {
    switch (degrees) {
    case 90: return rotate90(img);
    case 180: return rotate180(img);
    case 45: return detail::rotate_inscribed(img, 45.0);
    default: fail(ErrorKind::InvalidArgument, "unsupported rotation angle " + std::to_string(degrees) + " (expected 45, 90 or 180)");
    }
}

} // namespace egoseg
