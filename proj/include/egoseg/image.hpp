#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "egoseg/error.hpp"

namespace egoseg {

/// Interleaved 8-bit sRGB raster, row-major (R,G,B per pixel).
struct ImageRGB8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    ImageRGB8() = default;
    ImageRGB8(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(checked_size(w, h), fill) {}
    ImageRGB8(int w, int h, std::vector<std::uint8_t> bytes) : width(w), height(h), data(std::move(bytes)) {
        require(data.size() == checked_size(w, h), ErrorKind::InvalidArgument,
                "ImageRGB8: data length does not match width*height*3");
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::uint8_t* px(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* px(int x, int y) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }

    bool operator==(const ImageRGB8&) const = default;

private:
    static std::size_t checked_size(int w, int h) {
        require(w >= 1 && h >= 1, ErrorKind::InvalidArgument, "image dimensions must be >= 1");
        return static_cast<std::size_t>(w) * h * 3;
    }
};

/// Planar float raster. RGB-float images hold [0,1]; HSV images hold H in degrees, S and V in [0,1].
struct ImageF32 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    ImageF32() = default;
    ImageF32(int w, int h, int c, float fill = 0.0f) : width(w), height(h), channels(c) {
        require(w >= 1 && h >= 1 && c >= 1, ErrorKind::InvalidArgument, "image dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * h * c, fill);
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    std::span<float> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const float> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
    float& at(int c, int x, int y) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int x, int y) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const ImageF32&) const = default;
};

/// Single-channel raster. The tag keeps masks of different meaning from mixing.
template <class T, class Tag>
struct Plane {
    using value_type = T;

    int width = 0;
    int height = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int w, int h, T fill = T{}) : width(w), height(h) {
        require(w >= 1 && h >= 1, ErrorKind::InvalidArgument, "mask dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::size_t size() const { return data.size(); }
    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    template <class Other>
    bool same_shape(const Other& o) const { return width == o.width && height == o.height; }

    bool operator==(const Plane&) const = default;
};

struct BinaryTag {};
struct LabelTag {};
struct AlphaTag {};
struct TrimapTag {};

/// Values strictly in {0,1}.
using BinaryMask = Plane<std::uint8_t, BinaryTag>;
/// Class ids: 0 background, 1 body, 2..31 object categories.
using LabelMask = Plane<std::uint8_t, LabelTag>;
/// Opacity in [0,1].
using AlphaMask = Plane<float, AlphaTag>;

enum class TrimapState : std::uint8_t { Background = 0, Unknown = 128, Foreground = 255 };
using Trimap = Plane<TrimapState, TrimapTag>;

inline constexpr int kMaxClassId = 31;

enum class SeShape { Square, Disc };

struct StructuringElement {
    int radius = 1;
    SeShape shape = SeShape::Square;

    StructuringElement() = default;
    StructuringElement(int r, SeShape s = SeShape::Square) : radius(r), shape(s) {
        require(r >= 1, ErrorKind::InvalidArgument, "structuring element radius must be >= 1");
    }

    bool contains(int dx, int dy) const {
        if (shape == SeShape::Square) return std::abs(dx) <= radius && std::abs(dy) <= radius;
        return dx * dx + dy * dy <= radius * radius;
    }
};

inline float to_unit(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

inline std::uint8_t to_byte(double v) {
    const double scaled = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

inline ImageF32 to_float(const ImageRGB8& img) {
    ImageF32 out(img.width, img.height, 3);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out.data[c * n + i] = to_unit(img.data[i * 3 + c]);
    return out;
}

inline ImageRGB8 to_rgb8(const ImageF32& img) {
    require(img.channels == 3, ErrorKind::InvalidArgument, "to_rgb8 needs a 3-channel image");
    ImageRGB8 out(img.width, img.height);
    const std::size_t n = img.plane_size();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = to_byte(img.data[c * n + i]);
    return out;
}

inline BinaryMask complement(const BinaryMask& m) {
    BinaryMask out = m;
    for (auto& v : out.data) v = v ? 0 : 1;
    return out;
}

inline std::size_t count_ones(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count(m.data.begin(), m.data.end(), std::uint8_t{1}));
}

inline std::string dims_string(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

} // namespace egoseg
