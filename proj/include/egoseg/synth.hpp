#pragma once

#include <algorithm>

#include "egoseg/chromakey.hpp"
#include "egoseg/geometry.hpp"
#include "egoseg/matting.hpp"

namespace egoseg {

struct SynthResult {
    ImageRGB8 image;
    BinaryMask mask;  // alpha_to_label of the alpha used for blending
    AlphaMask alpha;
    Trimap trimap;
};

/// Green-screen frame + background -> composite with automatic ground truth:
/// key -> trimap -> shared-sampling matte -> blend.
inline SynthResult synthesize_sample(const ImageRGB8& fg_frame, const ImageRGB8& background, const ChromaRange& chroma,
                                     const StructuringElement& trimap_se, const MattingParams& params) {
    const ImageRGB8 bg = (background.width == fg_frame.width && background.height == fg_frame.height)
                             ? background
                             : resize_bilinear(background, fg_frame.width, fg_frame.height);
    SynthResult r;
    const BinaryMask keyed = extract_foreground_mask(fg_frame, chroma);
    const std::size_t ones = count_ones(keyed);
    require(ones > 0, ErrorKind::InvalidInput, "frame has no foreground: every pixel matches the chroma key");
    r.trimap = make_trimap(keyed, trimap_se);
    if (ones == keyed.size()) {
        // Nothing to key out: the frame is entirely foreground.
        r.alpha = AlphaMask(fg_frame.width, fg_frame.height, 1.0f);
    } else {
        r.alpha = shared_sampling_matte(fg_frame, r.trimap, params);
    }
    r.image = composite(fg_frame, bg, r.alpha);
    r.mask = alpha_to_label(r.alpha);
    return r;
}

} // namespace egoseg
