#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <vector>

#include "egoseg/image.hpp"
#include "egoseg/morphology.hpp"

namespace egoseg {

/// Foreground = erode(mask), Background = not dilate(mask), Unknown = the band in between.
inline Trimap make_trimap(const BinaryMask& mask, const StructuringElement& se) {
    const BinaryMask inner = erode(mask, se);
    const BinaryMask outer = dilate(mask, se);
    Trimap t(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (inner.data[i])
            t.data[i] = TrimapState::Foreground;
        else if (!outer.data[i])
            t.data[i] = TrimapState::Background;
        else
            t.data[i] = TrimapState::Unknown;
    }
    return t;
}

struct TrimapCounts {
    std::size_t foreground = 0;
    std::size_t background = 0;
    std::size_t unknown = 0;
};

inline TrimapCounts count_states(const Trimap& t) {
    TrimapCounts c;
    for (auto s : t.data) {
        if (s == TrimapState::Foreground) ++c.foreground;
        else if (s == TrimapState::Background) ++c.background;
        else ++c.unknown;
    }
    return c;
}

using Rgb = std::array<float, 3>;

/// Squared norm below which a (F,B) pair is treated as degenerate.
inline constexpr float kDegeneratePairEps = 1e-6f;

/// Projection of c onto the F-B line, clamped to [0,1]; 0.5 when F and B coincide.
inline float estimate_alpha_pair(const Rgb& c, const Rgb& f, const Rgb& b) {
    float num = 0.0f, den = 0.0f;
    for (int k = 0; k < 3; ++k) {
        const float fb = f[k] - b[k];
        num += (c[k] - b[k]) * fb;
        den += fb * fb;
    }
    if (den < kDegeneratePairEps) return 0.5f;
    return std::clamp(num / den, 0.0f, 1.0f);
}

/// Distance between c and its reconstruction alpha*F + (1-alpha)*B.
inline float chromatic_distortion(const Rgb& c, const Rgb& f, const Rgb& b, float alpha) {
    float s = 0.0f;
    for (int k = 0; k < 3; ++k) {
        const float d = c[k] - (alpha * f[k] + (1.0f - alpha) * b[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

inline float chromatic_distortion(const Rgb& c, const Rgb& f, const Rgb& b) {
    return chromatic_distortion(c, f, b, estimate_alpha_pair(c, f, b));
}

struct MattingParams {
    int ray_count = 16;
    int search_step = 2;
    int max_search = 64;
    float color_weight = 1.0f;
    float distance_weight = 0.3f;
    int refine_window = 5;
    int smooth_radius = 3;
    // Expansion stage: unknown pixels this close (pixels / RGB distance in [0,1] units) to a known pixel adopt its label.
    int expansion_radius = 3;
    float expansion_color_threshold = 5.0f / 255.0f;
    // Confidence = exp(-confidence_lambda * distortion); low-confidence pixels lean on the smoothed estimate.
    float confidence_lambda = 10.0f;
    // Colour bandwidth of the smoothing affinity.
    float smooth_color_sigma = 0.1f;

    void validate() const {
        require(ray_count >= 4, ErrorKind::InvalidArgument, "matting ray_count must be >= 4");
        require(search_step >= 1 && max_search >= search_step, ErrorKind::InvalidArgument,
                "matting needs max_search >= search_step >= 1");
        require(color_weight > 0 && distance_weight > 0, ErrorKind::InvalidArgument, "matting weights must be > 0");
        require(refine_window >= 0 && smooth_radius >= 0 && expansion_radius >= 0, ErrorKind::InvalidArgument,
                "matting window radii must be >= 0");
        require(confidence_lambda > 0 && smooth_color_sigma > 0, ErrorKind::InvalidArgument,
                "matting confidence_lambda and smooth_color_sigma must be > 0");
    }
};

namespace detail {

struct Sample {
    Rgb color;
    int x;
    int y;
};

struct PairEstimate {
    Rgb f{};
    Rgb b{};
    int fx = 0, fy = 0, bx = 0, by = 0;
    float alpha = 0.5f;
    float score = std::numeric_limits<float>::infinity();
};

class SharedSampler {
public:
    SharedSampler(const ImageRGB8& img, const Trimap& trimap, const MattingParams& params)
        : img_(img), trimap_(trimap), p_(params), w_(img.width), h_(img.height), colors_(img.pixel_count()) {
        for (std::size_t i = 0; i < colors_.size(); ++i)
            for (int k = 0; k < 3; ++k) colors_[i][k] = to_unit(img.data[i * 3 + k]);
    }

    AlphaMask run() {
        AlphaMask alpha(w_, h_);
        std::vector<int> unknown;
        for (int y = 0; y < h_; ++y) {
            for (int x = 0; x < w_; ++x) {
                const auto s = trimap_.at(x, y);
                if (s == TrimapState::Foreground) alpha.at(x, y) = 1.0f;
                else if (s == TrimapState::Background) alpha.at(x, y) = 0.0f;
                else unknown.push_back(y * w_ + x);
            }
        }
        if (unknown.empty()) return alpha;

        nearest_fg_ = nearest_known(TrimapState::Foreground);
        nearest_bg_ = nearest_known(TrimapState::Background);

        // Samples are gathered once and shared by the expansion test and the pair search.
        std::vector<std::vector<Sample>> fg_samples(unknown.size()), bg_samples(unknown.size());
        for (std::size_t u = 0; u < unknown.size(); ++u) gather(unknown[u], fg_samples[u], bg_samples[u]);

        // (1) expansion
        std::vector<std::uint8_t> resolved(unknown.size(), 0);
        for (std::size_t u = 0; u < unknown.size(); ++u) {
            const int label = expansion_label(unknown[u], fg_samples[u], bg_samples[u]);
            if (label >= 0) {
                alpha.data[unknown[u]] = static_cast<float>(label);
                resolved[u] = 1;
            }
        }

        // (2) gathering: best pair per pixel
        std::vector<int> slot(colors_.size(), -1);
        for (std::size_t u = 0; u < unknown.size(); ++u)
            if (!resolved[u]) slot[unknown[u]] = static_cast<int>(u);
        std::vector<PairEstimate> best(unknown.size());
        for (std::size_t u = 0; u < unknown.size(); ++u)
            if (!resolved[u]) best[u] = best_pair(unknown[u], fg_samples[u], bg_samples[u]);

        // (3) refinement: share pairs between neighbours, evaluated on each pixel's own colour
        std::vector<float> refined(unknown.size(), 0.0f), confidence(unknown.size(), 1.0f);
        for (std::size_t u = 0; u < unknown.size(); ++u) {
            if (resolved[u]) continue;
            refine(unknown[u], best, slot, refined[u], confidence[u]);
        }
        for (std::size_t u = 0; u < unknown.size(); ++u)
            if (!resolved[u]) alpha.data[unknown[u]] = refined[u];

        // (4) local smoothing over the refined alpha field
        const AlphaMask stage3 = alpha;
        for (std::size_t u = 0; u < unknown.size(); ++u) {
            if (resolved[u]) continue;
            const float smoothed = smooth(unknown[u], stage3);
            const float c = confidence[u];
            alpha.data[unknown[u]] = std::clamp(c * refined[u] + (1.0f - c) * smoothed, 0.0f, 1.0f);
        }
        return alpha;
    }

private:
    // Multi-source BFS (8-connected) giving each pixel the index of a nearby known pixel of one class.
    std::vector<int> nearest_known(TrimapState state) const {
        std::vector<int> src(colors_.size(), -1);
        std::deque<int> queue;
        for (int i = 0; i < static_cast<int>(colors_.size()); ++i) {
            if (trimap_.data[i] == state) {
                src[i] = i;
                queue.push_back(i);
            }
        }
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            const int x = i % w_, y = i / w_;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w_ || ny >= h_) continue;
                    const int j = ny * w_ + nx;
                    if (src[j] >= 0) continue;
                    src[j] = src[i];
                    queue.push_back(j);
                }
            }
        }
        return src;
    }

    Sample sample_at(int idx) const { return {colors_[idx], idx % w_, idx / w_}; }

    void gather(int idx, std::vector<Sample>& fg, std::vector<Sample>& bg) const {
        const int px = idx % w_, py = idx / w_;
        // Per-pixel angular offset from a 3x3 pattern so neighbours probe different directions.
        const double offset = ((px % 3) * 3 + (py % 3)) / 9.0;
        for (int k = 0; k < p_.ray_count; ++k) {
            const double theta = 2.0 * std::numbers::pi * (k + offset) / p_.ray_count;
            const double dx = std::cos(theta), dy = std::sin(theta);
            bool have_f = false, have_b = false;
            for (int t = p_.search_step; t <= p_.max_search && !(have_f && have_b); t += p_.search_step) {
                const int x = static_cast<int>(std::lround(px + t * dx));
                const int y = static_cast<int>(std::lround(py + t * dy));
                if (x < 0 || y < 0 || x >= w_ || y >= h_) break;
                const auto s = trimap_.at(x, y);
                if (s == TrimapState::Foreground && !have_f) {
                    fg.push_back(sample_at(y * w_ + x));
                    have_f = true;
                } else if (s == TrimapState::Background && !have_b) {
                    bg.push_back(sample_at(y * w_ + x));
                    have_b = true;
                }
            }
        }
        if (fg.empty()) fg.push_back(sample_at(nearest_fg_[idx]));
        if (bg.empty()) bg.push_back(sample_at(nearest_bg_[idx]));
    }

    static float color_dist(const Rgb& a, const Rgb& b) {
        float s = 0.0f;
        for (int k = 0; k < 3; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(s);
    }

    // Returns 1/0 when the pixel is unambiguously explained by a nearby known region, -1 otherwise.
    int expansion_label(int idx, const std::vector<Sample>& fg, const std::vector<Sample>& bg) const {
        const int r = p_.expansion_radius;
        if (r == 0) return -1;
        const int px = idx % w_, py = idx / w_;
        const Rgb& c = colors_[idx];
        const float thr = p_.expansion_color_threshold;
        int best_label = -1;
        int best_d2 = std::numeric_limits<int>::max();
        bool saw_f = false, saw_b = false;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                const int x = px + dx, y = py + dy;
                if (x < 0 || y < 0 || x >= w_ || y >= h_) continue;
                const auto s = trimap_.at(x, y);
                if (s == TrimapState::Unknown) continue;
                if (color_dist(c, colors_[y * w_ + x]) > thr) continue;
                const bool is_f = s == TrimapState::Foreground;
                (is_f ? saw_f : saw_b) = true;
                const int d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best_label = is_f ? 1 : 0;
                }
            }
        }
        if (best_label < 0 || (saw_f && saw_b)) return -1;
        // Ambiguous if the opposite class also offers a matching colour along the rays.
        const auto& other = best_label == 1 ? bg : fg;
        for (const auto& s : other)
            if (color_dist(c, s.color) <= thr) return -1;
        return best_label;
    }

    PairEstimate best_pair(int idx, const std::vector<Sample>& fg, const std::vector<Sample>& bg) const {
        const int px = idx % w_, py = idx / w_;
        const Rgb& c = colors_[idx];
        const float norm = 1.0f / (2.0f * p_.max_search);
        PairEstimate best;
        for (const auto& f : fg) {
            const float df = std::hypot(static_cast<float>(f.x - px), static_cast<float>(f.y - py));
            for (const auto& b : bg) {
                const float db = std::hypot(static_cast<float>(b.x - px), static_cast<float>(b.y - py));
                const float a = estimate_alpha_pair(c, f.color, b.color);
                const float score = p_.color_weight * chromatic_distortion(c, f.color, b.color, a) +
                                    p_.distance_weight * (df + db) * norm;
                if (score < best.score) best = {f.color, b.color, f.x, f.y, b.x, b.y, a, score};
            }
        }
        return best;
    }

    void refine(int idx, const std::vector<PairEstimate>& best, const std::vector<int>& slot, float& alpha_out,
                float& confidence_out) const {
        const int px = idx % w_, py = idx / w_;
        const Rgb& c = colors_[idx];
        const int r = p_.refine_window;
        struct Cand {
            float distortion;
            int order;
            const PairEstimate* pair;
        };
        std::vector<Cand> cands;
        cands.reserve(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1));
        int order = 0;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx, ++order) {
                const int x = px + dx, y = py + dy;
                if (x < 0 || y < 0 || x >= w_ || y >= h_) continue;
                const int s = slot[y * w_ + x];
                if (s < 0) continue;
                const PairEstimate& q = best[s];
                cands.push_back({chromatic_distortion(c, q.f, q.b), order, &q});
            }
        }
        // Deterministic top-3 (ties broken by window position).
        const std::size_t k = std::min<std::size_t>(3, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + k, cands.end(), [](const Cand& a, const Cand& b) {
            return a.distortion != b.distortion ? a.distortion < b.distortion : a.order < b.order;
        });
        Rgb f{}, b{};
        for (std::size_t i = 0; i < k; ++i)
            for (int ch = 0; ch < 3; ++ch) {
                f[ch] += cands[i].pair->f[ch] / k;
                b[ch] += cands[i].pair->b[ch] / k;
            }
        alpha_out = estimate_alpha_pair(c, f, b);
        confidence_out = std::exp(-p_.confidence_lambda * chromatic_distortion(c, f, b, alpha_out));
    }

    float smooth(int idx, const AlphaMask& field) const {
        const int r = p_.smooth_radius;
        if (r == 0) return field.data[idx];
        const int px = idx % w_, py = idx / w_;
        const Rgb& c = colors_[idx];
        const float sigma_s = std::max(1.0f, r / 2.0f);
        const float inv_s = 1.0f / (2.0f * sigma_s * sigma_s);
        const float inv_c = 1.0f / (2.0f * p_.smooth_color_sigma * p_.smooth_color_sigma);
        double num = 0.0, den = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                const int x = px + dx, y = py + dy;
                if (x < 0 || y < 0 || x >= w_ || y >= h_) continue;
                const int j = y * w_ + x;
                const float cd = color_dist(c, colors_[j]);
                const double w = std::exp(-(dx * dx + dy * dy) * inv_s - cd * cd * inv_c);
                num += w * field.data[j];
                den += w;
            }
        }
        return static_cast<float>(num / den);
    }

    const ImageRGB8& img_;
    const Trimap& trimap_;
    const MattingParams& p_;
    int w_, h_;
    std::vector<Rgb> colors_;
    std::vector<int> nearest_fg_, nearest_bg_;
};

} // namespace detail

/// Shared-sampling alpha matting. Known trimap regions map to exactly 1/0; the Unknown band runs
/// expansion, ray gathering, neighbour refinement, then affinity smoothing, with barriers in between.
inline AlphaMask shared_sampling_matte(const ImageRGB8& img, const Trimap& trimap, const MattingParams& params = {}) {
    params.validate();
    require(img.width == trimap.width && img.height == trimap.height, ErrorKind::InvalidArgument,
            "trimap " + dims_string(trimap.width, trimap.height) + " does not match image " +
                dims_string(img.width, img.height));
    const TrimapCounts counts = count_states(trimap);
    require(counts.foreground > 0, ErrorKind::InvalidInput, "trimap has no Foreground pixels");
    require(counts.background > 0, ErrorKind::InvalidInput, "trimap has no Background pixels");
    return detail::SharedSampler(img, trimap, params).run();
}

/// Per-pixel, per-channel alpha*fg + (1-alpha)*bg in float, rounded once to 8 bits.
inline ImageRGB8 composite(const ImageRGB8& fg, const ImageRGB8& bg, const AlphaMask& alpha) {
    require(fg.width == bg.width && fg.height == bg.height && fg.width == alpha.width && fg.height == alpha.height,
            ErrorKind::InvalidArgument,
            "composite inputs differ in size: fg " + dims_string(fg.width, fg.height) + ", bg " +
                dims_string(bg.width, bg.height) + ", alpha " + dims_string(alpha.width, alpha.height));
    ImageRGB8 out(fg.width, fg.height);
    for (std::size_t i = 0; i < fg.pixel_count(); ++i) {
        const double a = alpha.data[i];
        for (int c = 0; c < 3; ++c) {
            const double v = a * to_unit(fg.data[i * 3 + c]) + (1.0 - a) * to_unit(bg.data[i * 3 + c]);
            out.data[i * 3 + c] = to_byte(v);
        }
    }
    return out;
}

inline BinaryMask alpha_to_label(const AlphaMask& alpha, float threshold = 0.5f) {
    BinaryMask out(alpha.width, alpha.height);
    for (std::size_t i = 0; i < alpha.size(); ++i) out.data[i] = alpha.data[i] >= threshold ? 1 : 0;
    return out;
}

} // namespace egoseg
