#pragma once

#include <algorithm>
#include <cmath>

#include "egoseg/color.hpp"
#include "egoseg/image.hpp"
#include "egoseg/rng.hpp"

// Procedural stand-ins for captured footage: green-screen frames with egocentric limbs and
// textured indoor-ish backgrounds. Used to build toy corpora end to end.
namespace egoseg::toy {

struct Color {
    double r = 0, g = 0, b = 0; // [0,1]
};

inline Color from_hsv(double h, double s, double v) {
    const Rgbf c = hsv_to_rgb(Hsv{static_cast<float>(h), static_cast<float>(s), static_cast<float>(v)});
    return {c.r, c.g, c.b};
}

inline void blend_px(ImageRGB8& img, int x, int y, const Color& c, double a) {
    auto* p = img.px(x, y);
    const double v[3] = {c.r, c.g, c.b};
    for (int k = 0; k < 3; ++k) p[k] = to_byte(a * v[k] + (1.0 - a) * p[k] / 255.0);
}

inline Color skin_tone(Rng& rng) { return from_hsv(rng.uniform(10, 30), rng.uniform(0.25, 0.6), rng.uniform(0.3, 0.95)); }

/// Clothing hues avoid the keyed green/cyan band.
inline Color cloth_tone(Rng& rng) {
    double h = rng.uniform(0, 240);
    if (h >= 60) h += 120; // skip [60,180)
    const double s = rng.uniform() < 0.2 ? rng.uniform(0.0, 0.15) : rng.uniform(0.3, 0.9);
    return from_hsv(h, s, rng.uniform(0.2, 0.9));
}

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by, double& t) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    t = len2 > 0 ? std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0) : 0.0;
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

/// Draws a shaded limb (optional sleeve near the entry point, hand blob at the tip) with a
/// one-pixel anti-aliased rim.
inline void draw_limb(ImageRGB8& img, Rng& rng, double ax, double ay, double bx, double by, double radius) {
    const Color skin = skin_tone(rng);
    const Color cloth = cloth_tone(rng);
    const double sleeve = rng.uniform() < 0.6 ? rng.uniform(0.2, 0.7) : 0.0;
    const double hand_r = radius * rng.uniform(1.1, 1.5);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            double t;
            const double d = segment_distance(cx, cy, ax, ay, bx, by, t);
            const double r_here = t < sleeve ? radius * 1.15 : radius;
            const double dh = std::hypot(cx - bx, cy - by);
            double cover = std::clamp(r_here + 0.5 - d, 0.0, 1.0);
            const double cover_hand = std::clamp(hand_r + 0.5 - dh, 0.0, 1.0);
            Color c = t < sleeve ? cloth : skin;
            double rel = std::min(d / r_here, 1.0);
            if (cover_hand > cover) {
                cover = cover_hand;
                c = skin;
                rel = std::min(dh / hand_r, 1.0);
            }
            if (cover <= 0.0) continue;
            const double shade = 0.7 + 0.3 * std::sqrt(std::max(0.0, 1.0 - rel * rel));
            blend_px(img, x, y, {c.r * shade, c.g * shade, c.b * shade}, cover);
        }
    }
}

/// Chroma-green frame with one or two limbs entering from the bottom edge.
inline ImageRGB8 green_screen_frame(int w, int h, Rng& rng) {
    ImageRGB8 img(w, h);
    const double hue = rng.uniform(112, 128), sat = rng.uniform(0.65, 0.85), val = rng.uniform(0.55, 0.85);
    const double grad = rng.uniform(-0.15, 0.15);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = std::clamp(val + grad * (static_cast<double>(x) / w - 0.5) + rng.uniform(-0.02, 0.02), 0.2, 1.0);
            const Color c = from_hsv(hue, sat, v);
            auto* p = img.px(x, y);
            p[0] = to_byte(c.r), p[1] = to_byte(c.g), p[2] = to_byte(c.b);
        }
    }
    const int limbs = rng.uniform() < 0.5 ? 1 : 2;
    for (int i = 0; i < limbs; ++i) {
        const double ax = limbs == 1 ? rng.uniform(0.25, 0.75) * w : (i == 0 ? rng.uniform(0.1, 0.45) : rng.uniform(0.55, 0.9)) * w;
        const double ay = h + 2.0;
        const double bx = std::clamp(ax + rng.uniform(-0.3, 0.3) * w, 0.15 * w, 0.85 * w);
        const double by = rng.uniform(0.2, 0.6) * h;
        draw_limb(img, rng, ax, ay, bx, by, rng.uniform(0.06, 0.11) * w);
    }
    return img;
}

/// Textured background: stripes, checkerboard, smooth blobs or tiles, plus mild noise.
inline ImageRGB8 textured_background(int w, int h, Rng& rng) {
    ImageRGB8 img(w, h);
    const Color a = from_hsv(rng.uniform(0, 360), rng.uniform(0.0, 0.8), rng.uniform(0.2, 0.95));
    const Color b = from_hsv(rng.uniform(0, 360), rng.uniform(0.0, 0.8), rng.uniform(0.2, 0.95));
    const int kind = static_cast<int>(rng.uniform_int(0, 3));
    const double period = rng.uniform(6, 20);
    const double angle = rng.uniform(0, 3.14159);
    const double fx1 = rng.uniform(0.5, 3.0), fy1 = rng.uniform(0.5, 3.0), ph1 = rng.uniform(0, 6.28);
    const double fx2 = rng.uniform(0.5, 3.0), fy2 = rng.uniform(0.5, 3.0), ph2 = rng.uniform(0, 6.28);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double t;
            switch (kind) {
            case 0: { // stripes
                const double u = x * std::cos(angle) + y * std::sin(angle);
                t = 0.5 + 0.5 * std::sin(2 * 3.14159265 * u / period);
                break;
            }
            case 1: // checkerboard
                t = ((static_cast<int>(x / period) + static_cast<int>(y / period)) % 2) ? 1.0 : 0.0;
                break;
            case 2: // smooth blobs
                t = 0.5 + 0.25 * std::sin(fx1 * 6.28 * x / w + ph1) * std::cos(fy1 * 6.28 * y / h) +
                    0.25 * std::sin(fx2 * 6.28 * (x + y) / w + ph2) * std::cos(fy2 * 6.28 * y / h + ph1);
                break;
            default: { // tiles with grout lines
                const int gx = static_cast<int>(x / period), gy = static_cast<int>(y / period);
                const double lx = std::fmod(x, period), ly = std::fmod(y, period);
                t = (lx < 1.0 || ly < 1.0) ? 1.0 : 0.15 * ((gx * 7 + gy * 13) % 5) / 4.0;
                break;
            }
            }
            const double n = rng.uniform(-0.03, 0.03);
            auto* p = img.px(x, y);
            p[0] = to_byte(a.r * (1 - t) + b.r * t + n);
            p[1] = to_byte(a.g * (1 - t) + b.g * t + n);
            p[2] = to_byte(a.b * (1 - t) + b.b * t + n);
        }
    }
    return img;
}

} // namespace egoseg::toy
