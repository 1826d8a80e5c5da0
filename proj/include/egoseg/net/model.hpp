#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "egoseg/image.hpp"
#include "egoseg/net/autograd.hpp"

// Shallow encoder-decoder: ResNet-style stem + residual stages, a pyramid pooling module on the
// trunk, two deconvolution blocks, additive long skips and a full-resolution head.
namespace egoseg::net {

struct NetConfig {
    int stem_channels = 16;
    std::vector<int> stage_channels{16, 32, 64};
    std::vector<int> ppm_factors{6, 12, 18, 24};
    int num_classes = 2;
    bool skip_stem = true;   // stem output (/4) into the /4 decoder features
    bool skip_stage1 = true; // stage-1 output (/4) into the /4 decoder features
    bool skip_stage2 = true; // stage-2 output (/8) into the /8 decoder features
    int input_h = 64;
    int input_w = 64;
    PoolKind ppm_pool = PoolKind::Average;

    int encoder_stages() const { return static_cast<int>(stage_channels.size()); }
    int output_stride() const { return 4 << (encoder_stages() - 1); }

    void validate() const {
        require(stem_channels >= 1, ErrorKind::InvalidArgument, "net.stem_channels must be >= 1");
        require(encoder_stages() == 2 || encoder_stages() == 3, ErrorKind::InvalidArgument,
                "net.stage_channels must list 2 or 3 stages");
        for (int c : stage_channels) require(c >= 1, ErrorKind::InvalidArgument, "net.stage_channels must be >= 1");
        require(stage_channels.back() >= 4, ErrorKind::InvalidArgument,
                "net.stage_channels last entry must be >= 4 (pyramid branches use a quarter of it)");
        require(!ppm_factors.empty(), ErrorKind::InvalidArgument, "net.ppm_factors must not be empty");
        for (std::size_t i = 0; i < ppm_factors.size(); ++i) {
            require(ppm_factors[i] >= 1, ErrorKind::InvalidArgument, "net.ppm_factors must be positive");
            require(i == 0 || ppm_factors[i] > ppm_factors[i - 1], ErrorKind::InvalidArgument,
                    "net.ppm_factors must be strictly increasing");
        }
        require(num_classes >= 2, ErrorKind::InvalidArgument, "net.num_classes must be >= 2");
        check_input(input_h, input_w);
    }

    void check_input(int h, int w) const {
        require(h >= 16 && w >= 16 && h % 16 == 0 && w % 16 == 0, ErrorKind::InvalidArgument,
                "network input " + std::to_string(w) + "x" + std::to_string(h) +
                    " must have both sides divisible by 16; pad or resize the image first");
    }
};

/// Names with these prefixes form the encoder (what an encoder-only weight file carries).
inline bool is_encoder_param(const std::string& name) {
    return name.rfind("stem.", 0) == 0 || name.rfind("stage", 0) == 0;
}

namespace detail {

template <class T>
void add_conv(Params<T>& p, const std::string& name, int cout, int cin, int k, bool bias) {
    p.entries[name + ".w"] = ParamEntry<T>{ParamKind::ConvWeight, Tensor4<T>(cout, cin, k, k), {}, {}, {}};
    if (bias) p.entries[name + ".b"] = ParamEntry<T>{ParamKind::Bias, Tensor4<T>(cout, 1, 1, 1), {}, {}, {}};
}

template <class T>
void add_deconv(Params<T>& p, const std::string& name, int cin, int cout) {
    p.entries[name + ".w"] = ParamEntry<T>{ParamKind::DeconvWeight, Tensor4<T>(cin, cout, 4, 4), {}, {}, {}};
}

template <class T>
void add_bn(Params<T>& p, const std::string& name, int c) {
    const Tensor4<T> v(c, 1, 1, 1);
    p.entries[name + ".gamma"] = ParamEntry<T>{ParamKind::BnGamma, v, {}, {}, {}};
    p.entries[name + ".beta"] = ParamEntry<T>{ParamKind::BnBeta, v, {}, {}, {}};
    p.entries[name + ".mean"] = ParamEntry<T>{ParamKind::BnMean, v, {}, {}, {}};
    p.entries[name + ".var"] = ParamEntry<T>{ParamKind::BnVar, v, {}, {}, {}};
}

inline int decoder_channels(const NetConfig& cfg, int block) {
    const auto& s = cfg.stage_channels;
    const int target = static_cast<int>(s.size()) - 2 - block;
    return s[std::max(target, 0)];
}

} // namespace detail

/// Parameter set with the exact names and shapes the forward pass expects, all zero.
template <class T>
Params<T> param_layout(const NetConfig& cfg) {
    cfg.validate();
    Params<T> p;
    const auto& sc = cfg.stage_channels;
    detail::add_conv(p, "stem.conv", cfg.stem_channels, 3, 7, false);
    detail::add_bn(p, "stem.bn", cfg.stem_channels);
    int cin = cfg.stem_channels;
    for (int s = 0; s < cfg.encoder_stages(); ++s) {
        for (int b = 0; b < 2; ++b) {
            const std::string base = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
            const int stride = (b == 0 && s > 0) ? 2 : 1;
            detail::add_conv(p, base + ".conv1", sc[s], cin, 3, false);
            detail::add_bn(p, base + ".bn1", sc[s]);
            detail::add_conv(p, base + ".conv2", sc[s], sc[s], 3, false);
            detail::add_bn(p, base + ".bn2", sc[s]);
            if (stride != 1 || cin != sc[s]) {
                detail::add_conv(p, base + ".proj", sc[s], cin, 1, false);
                detail::add_bn(p, base + ".proj_bn", sc[s]);
            }
            cin = sc[s];
        }
    }
    const int trunk = sc.back(), branch = trunk / 4;
    for (std::size_t i = 0; i < cfg.ppm_factors.size(); ++i)
        detail::add_conv(p, "ppm.branch" + std::to_string(i), branch, trunk, 1, true);
    detail::add_conv(p, "ppm.fuse", trunk, trunk + branch * static_cast<int>(cfg.ppm_factors.size()), 1, false);
    detail::add_bn(p, "ppm.fuse_bn", trunk);
    int c = trunk;
    for (int d = 0; d < 2; ++d) {
        const int co = detail::decoder_channels(cfg, d);
        const std::string base = "dec" + std::to_string(d + 1);
        detail::add_deconv(p, base + ".deconv", c, co);
        detail::add_bn(p, base + ".bn", co);
        c = co;
    }
    // Skips land on the decoder block whose output matches their resolution.
    const int dec_at_4 = cfg.encoder_stages() == 3 ? 1 : 0;
    const int ch4 = detail::decoder_channels(cfg, dec_at_4);
    if (cfg.skip_stem) detail::add_conv(p, "skip.stem", ch4, cfg.stem_channels, 1, false);
    if (cfg.skip_stage1) detail::add_conv(p, "skip.stage1", ch4, sc[0], 1, false);
    if (cfg.skip_stage2 && cfg.encoder_stages() == 3)
        detail::add_conv(p, "skip.stage2", detail::decoder_channels(cfg, 0), sc[1], 1, false);
    detail::add_conv(p, "head", cfg.num_classes, c, 1, true);
    return p;
}

/// He-normal conv/deconv weights, BN gamma 1 / beta 0 / running (0, 1), zero biases.
/// Entries are initialised in name order from one seeded stream.
template <class T>
Params<T> init_params(const NetConfig& cfg, std::uint64_t seed) {
    Params<T> p = param_layout<T>(cfg);
    Rng rng(seed);
    for (auto& [_, e] : p.entries) init_entry(e, rng);
    return p;
}

enum class Mode { Train, Eval };

template <class T>
struct ForwardResult {
    Var<T> logits; // (n, num_classes, h, w)
    Var<T> trunk;  // encoder output, stride output_stride()
};

namespace detail {

template <class T>
struct Builder {
    Tape<T>& tape;
    Params<T>& p;
    bool training;

    Var<T> w(const std::string& name) { return tape.param(p.at(name)); }
    Var<T> b_opt(const std::string& name) { return p.contains(name) ? tape.param(p.at(name)) : nullptr; }

    Var<T> conv(const Var<T>& x, const std::string& name, ConvSpec s) {
        return conv2d(tape, x, w(name + ".w"), b_opt(name + ".b"), s);
    }
    Var<T> bn(const Var<T>& x, const std::string& name) {
        return batchnorm(tape, x, w(name + ".gamma"), w(name + ".beta"), p.at(name + ".mean"), p.at(name + ".var"), training);
    }
    Var<T> block(const Var<T>& x, const std::string& base, int stride) {
        Var<T> y = relu(tape, bn(conv(x, base + ".conv1", {stride, 1, 1}), base + ".bn1"));
        y = bn(conv(y, base + ".conv2", {1, 1, 1}), base + ".bn2");
        Var<T> sc = p.contains(base + ".proj.w") ? bn(conv(x, base + ".proj", {stride, 0, 1}), base + ".proj_bn") : x;
        return relu(tape, add(tape, y, sc));
    }
};

} // namespace detail

/// Full forward pass. In Train mode batch-norm uses batch statistics and updates running
/// buffers; Eval uses the running buffers.
template <class T>
ForwardResult<T> model_forward(const NetConfig& cfg, Params<T>& p, Tape<T>& tape, const Var<T>& x, Mode mode) {
    require(x->value.c() == 3, ErrorKind::InvalidArgument,
            "network input must have 3 channels, got shape " + x->value.shape.str());
    const int H = x->value.h(), W = x->value.w();
    cfg.check_input(H, W);
    detail::Builder<T> b{tape, p, mode == Mode::Train};

    const Var<T> s0 = relu(tape, b.bn(b.conv(x, "stem.conv", {2, 3, 1}), "stem.bn"));
    const Var<T> stem = maxpool(tape, s0, 3, 2, 1); // /4
    std::vector<Var<T>> taps;
    Var<T> h = stem;
    for (int s = 0; s < cfg.encoder_stages(); ++s) {
        const std::string base = "stage" + std::to_string(s + 1);
        h = b.block(h, base + ".block0", s > 0 ? 2 : 1);
        h = b.block(h, base + ".block1", 1);
        taps.push_back(h);
    }
    const Var<T> trunk = h;

    // Pyramid pooling: each factor is clamped to the map so large factors become global pooling.
    const int th = trunk->value.h(), tw = trunk->value.w();
    std::vector<Var<T>> parts{trunk};
    for (std::size_t i = 0; i < cfg.ppm_factors.size(); ++i) {
        const int f = std::min(cfg.ppm_factors[i], std::max(th, tw));
        Var<T> br = pool_factor(tape, trunk, f, cfg.ppm_pool);
        br = relu(tape, b.conv(br, "ppm.branch" + std::to_string(i), {}));
        parts.push_back(upsample_bilinear(tape, br, th, tw));
    }
    h = relu(tape, b.bn(b.conv(concat(tape, parts), "ppm.fuse", {}), "ppm.fuse_bn"));

    int stride = cfg.output_stride();
    for (int d = 0; d < 2; ++d) {
        const std::string base = "dec" + std::to_string(d + 1);
        h = relu(tape, b.bn(deconv2d(tape, h, b.w(base + ".deconv.w"), Var<T>{}, {2, 1, 1}), base + ".bn"));
        stride /= 2;
        if (stride == 8 && cfg.skip_stage2 && cfg.encoder_stages() == 3)
            h = add(tape, h, b.conv(taps[1], "skip.stage2", {}));
        if (stride == 4) {
            if (cfg.skip_stem) h = add(tape, h, b.conv(stem, "skip.stem", {}));
            if (cfg.skip_stage1) h = add(tape, h, b.conv(taps[0], "skip.stage1", {}));
        }
    }
    // The 1x1 head commutes with bilinear upsampling, so it runs at decoder resolution.
    Var<T> logits = b.conv(h, "head", {});
    logits = upsample_bilinear(tape, logits, H, W);
    return {logits, trunk};
}

/// ImageNet channel statistics used to normalise RGB input.
inline constexpr std::array<double, 3> kInputMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kInputStd{0.229, 0.224, 0.225};

template <class T>
void write_input(const ImageRGB8& img, Tensor4<T>& x, int n) {
    require(x.c() == 3 && x.h() == img.height && x.w() == img.width, ErrorKind::InvalidArgument,
            "image " + dims_string(img.width, img.height) + " does not fit input tensor " + x.shape.str());
    for (int c = 0; c < 3; ++c) {
        T* p = x.plane(n, c);
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            p[i] = static_cast<T>((img.data[i * 3 + c] / 255.0 - kInputMean[c]) / kInputStd[c]);
    }
}

template <class T>
Tensor4<T> to_input(const std::vector<const ImageRGB8*>& batch) {
    require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
    Tensor4<T> x(static_cast<int>(batch.size()), 3, batch[0]->height, batch[0]->width);
    for (std::size_t i = 0; i < batch.size(); ++i) write_input(*batch[i], x, static_cast<int>(i));
    return x;
}

/// Per-pixel argmax over classes (first maximum wins).
template <class T>
std::vector<LabelMask> argmax_labels(const Tensor4<T>& logits) {
    std::vector<LabelMask> out;
    const std::size_t hw = static_cast<std::size_t>(logits.h()) * logits.w();
    for (int n = 0; n < logits.n(); ++n) {
        LabelMask m(logits.w(), logits.h());
        for (std::size_t i = 0; i < hw; ++i) {
            int best = 0;
            for (int c = 1; c < logits.c(); ++c)
                if (logits.plane(n, c)[i] > logits.plane(n, best)[i]) best = c;
            m.data[i] = static_cast<std::uint8_t>(best);
        }
        out.push_back(std::move(m));
    }
    return out;
}

/// Eval-mode inference on one image whose sides are divisible by 16.
template <class T>
LabelMask predict(const NetConfig& cfg, Params<T>& p, const ImageRGB8& img) {
    Tape<T> tape(false);
    auto x = tape.constant(to_input<T>({&img}));
    auto r = model_forward(cfg, p, tape, x, Mode::Eval);
    return std::move(argmax_labels(r.logits->value)[0]);
}

} // namespace egoseg::net
