#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "egoseg/augment.hpp"
#include "egoseg/net/adam.hpp"
#include "egoseg/net/loss.hpp"
#include "egoseg/net/model.hpp"

namespace egoseg::net {

struct Sample {
    ImageRGB8 image;
    LabelMask mask;
};

/// Brings a sample to the network input size (bilinear image, nearest mask).
inline Sample fit_to_input(Sample s, int h, int w) {
    if (s.image.width != w || s.image.height != h) s.image = resize_bilinear(s.image, w, h);
    if (s.mask.width != w || s.mask.height != h) s.mask = resize_nearest(s.mask, w, h);
    return s;
}

inline Augmented<LabelMask> augment_sample(const Sample& s, const AugmentConfig& cfg, Rng& draw) {
    return augment(s.image, s.mask, cfg, draw);
}

struct StepReport {
    int step = 0;
    double loss = 0.0;
};

struct TrainHooks {
    std::function<void(const StepReport&)> on_step;
    std::function<void(int step)> on_checkpoint; // called every checkpoint_every steps
};

/// Minibatch Adam on weighted cross-entropy. Batches walk a per-epoch seeded permutation;
/// augmentation draws come from a substream per (epoch, position) so they are independent of
/// batch composition. Returns the loss of every step.
template <class T>
std::vector<double> train(const NetConfig& cfg, Params<T>& params, const std::vector<Sample>& samples, const TrainConfig& tc,
                          const std::vector<double>& class_weights, const AugmentConfig* augment, const TrainHooks& hooks = {}) {
    cfg.validate();
    tc.validate(cfg.num_classes);
    require(!samples.empty(), ErrorKind::InvalidInput, "train: no training samples");
    require(static_cast<int>(class_weights.size()) == cfg.num_classes, ErrorKind::InvalidArgument,
            "train: need one class weight per class");
    for (const auto& s : samples)
        require(s.image.width == cfg.input_w && s.image.height == cfg.input_h && s.mask.width == cfg.input_w &&
                    s.mask.height == cfg.input_h,
                ErrorKind::InvalidArgument, "train: samples must match the configured input size");
    if (augment) augment->validate();

    std::vector<std::size_t> order(samples.size());
    std::vector<double> losses;
    losses.reserve(tc.max_steps);
    std::size_t cursor = order.size();
    std::uint64_t epoch = 0;
    const std::size_t hw = static_cast<std::size_t>(cfg.input_h) * cfg.input_w;
    for (int step = 1; step <= tc.max_steps; ++step) {
        std::vector<ImageRGB8> imgs;
        std::vector<std::uint8_t> labels;
        labels.reserve(hw * tc.batch_size);
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                Rng shuffle = Rng::substream(tc.seed, 2 * epoch);
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
                cursor = 0;
                ++epoch;
            }
            const std::size_t pos = (epoch - 1) * order.size() + cursor;
            const Sample& s = samples[order[cursor++]];
            if (augment) {
                Rng draw = Rng::substream(augment->seed ^ tc.seed, 2 * pos + 1);
                auto a = augment_sample(s, *augment, draw);
                imgs.push_back(std::move(a.image));
                labels.insert(labels.end(), a.mask.data.begin(), a.mask.data.end());
            } else {
                imgs.push_back(s.image);
                labels.insert(labels.end(), s.mask.data.begin(), s.mask.data.end());
            }
        }
        std::vector<const ImageRGB8*> ptrs;
        for (const auto& im : imgs) ptrs.push_back(&im);

        params.zero_grad();
        Tape<T> tape(true);
        auto x = tape.constant(to_input<T>(ptrs));
        auto fwd = model_forward(cfg, params, tape, x, Mode::Train);
        auto lr = weighted_cross_entropy(fwd.logits->value, labels, class_weights);
        tape.backward(fwd.logits, lr.dlogits);
        adam_step(params, tc, step);
        losses.push_back(lr.loss);
        if (hooks.on_step) hooks.on_step({step, static_cast<double>(lr.loss)});
        if (hooks.on_checkpoint && tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step != tc.max_steps)
            hooks.on_checkpoint(step);
    }
    return losses;
}

} // namespace egoseg::net
