#pragma once

#include <cstdint>
#include <vector>

#include "egoseg/image.hpp"

namespace egoseg {

namespace detail {

// Separable 1-D pass for square elements. Out-of-bounds samples read as 0.
// For dilation that matches clamping the window; for erosion it zeroes border windows.
inline void square_pass(const std::vector<std::uint8_t>& src, std::vector<std::uint8_t>& dst, int w, int h,
                        int r, bool horizontal, bool take_max) {
    const int len = horizontal ? w : h;
    const int lines = horizontal ? h : w;
    for (int line = 0; line < lines; ++line) {
        for (int i = 0; i < len; ++i) {
            std::uint8_t acc = take_max ? 0 : 1;
            for (int d = -r; d <= r; ++d) {
                const int j = i + d;
                std::uint8_t v = 0;
                if (j >= 0 && j < len) {
                    const int x = horizontal ? j : line;
                    const int y = horizontal ? line : j;
                    v = src[static_cast<std::size_t>(y) * w + x];
                }
                if (take_max ? v != 0 : v == 0) {
                    acc = take_max ? 1 : 0;
                    break;
                }
            }
            const int x = horizontal ? i : line;
            const int y = horizontal ? line : i;
            dst[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

inline BinaryMask morph(const BinaryMask& mask, const StructuringElement& se, bool take_max) {
    BinaryMask out(mask.width, mask.height);
    if (se.shape == SeShape::Square) {
        std::vector<std::uint8_t> tmp(mask.size());
        square_pass(mask.data, tmp, mask.width, mask.height, se.radius, true, take_max);
        square_pass(tmp, out.data, mask.width, mask.height, se.radius, false, take_max);
        return out;
    }
    const int r = se.radius;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::uint8_t acc = take_max ? 0 : 1;
            for (int dy = -r; dy <= r && acc == (take_max ? 0 : 1); ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!se.contains(dx, dy)) continue;
                    const std::uint8_t v = mask.in_bounds(x + dx, y + dy) ? mask.at(x + dx, y + dy) : 0;
                    if (take_max ? v != 0 : v == 0) {
                        acc = take_max ? 1 : 0;
                        break;
                    }
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

} // namespace detail

/// 1 iff any pixel under the element is 1.
inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    return detail::morph(mask, se, true);
}

/// 1 iff every pixel under the element is 1; pixels beyond the border count as 0.
inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    return detail::morph(mask, se, false);
}

inline BinaryMask open(const BinaryMask& mask, const StructuringElement& se) {
    return dilate(erode(mask, se), se);
}

inline BinaryMask close(const BinaryMask& mask, const StructuringElement& se) {
    return erode(dilate(mask, se), se);
}

} // namespace egoseg
