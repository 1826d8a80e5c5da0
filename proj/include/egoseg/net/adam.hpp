#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "egoseg/net/params.hpp"

namespace egoseg::net {

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 2e-4;
    int batch_size = 4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> class_weights; // empty: derive from the train split
    int max_steps = 2000;
    int checkpoint_every = 500; // 0 disables intermediate checkpoints
    std::uint64_t seed = 0;

    void validate(int num_classes) const {
        require(learning_rate > 0 && weight_decay >= 0 && batch_size >= 1 && max_steps >= 1, ErrorKind::InvalidArgument,
                "train: learning_rate, batch_size and max_steps must be positive and weight_decay >= 0");
        require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0, ErrorKind::InvalidArgument,
                "train: Adam betas must lie in [0,1) and eps must be positive");
        require(checkpoint_every >= 0, ErrorKind::InvalidArgument, "train.checkpoint_every must be >= 0");
        if (!class_weights.empty()) {
            require(static_cast<int>(class_weights.size()) == num_classes, ErrorKind::InvalidArgument,
                    "train.class_weights needs one weight per class (" + std::to_string(num_classes) + ")");
            for (double w : class_weights) require(w > 0, ErrorKind::InvalidArgument, "train.class_weights must be positive");
        }
    }
};

/// One Adam update (bias-corrected) at step t >= 1. Decoupled weight decay
/// theta -= lr * wd * theta touches conv/deconv weights only.
template <class T>
void adam_step(Params<T>& p, const TrainConfig& tc, int t) {
    require(t >= 1, ErrorKind::InvalidArgument, "adam step index must be >= 1");
    const double bc1 = 1.0 - std::pow(tc.beta1, t), bc2 = 1.0 - std::pow(tc.beta2, t);
    for (auto& [name, e] : p.entries) {
        if (!trainable(e.kind)) continue;
        if (e.grad.shape != e.value.shape) e.zero_grad();
        if (e.m.shape != e.value.shape) e.m = Tensor4<T>(e.value.shape);
        if (e.v.shape != e.value.shape) e.v = Tensor4<T>(e.value.shape);
        const bool decay = decays(e.kind) && tc.weight_decay > 0;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad.data[i];
            const double m = tc.beta1 * e.m.data[i] + (1.0 - tc.beta1) * g;
            const double v = tc.beta2 * e.v.data[i] + (1.0 - tc.beta2) * g * g;
            e.m.data[i] = static_cast<T>(m);
            e.v.data[i] = static_cast<T>(v);
            double theta = e.value.data[i];
            if (decay) theta -= tc.learning_rate * tc.weight_decay * theta;
            theta -= tc.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + tc.eps);
            e.value.data[i] = static_cast<T>(theta);
        }
    }
}

} // namespace egoseg::net
