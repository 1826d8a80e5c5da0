#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "egoseg/net/tensor.hpp"

namespace egoseg::net {

template <class T>
struct LossResult {
    T loss = 0;
    Tensor4<T> dlogits;
};

/// Weighted cross-entropy normalised by the total weight of the labelled pixels:
///   L = -(1 / sum_i w[y_i]) * sum_i w[y_i] * log softmax(z_i)[y_i]
/// `labels` holds n*h*w class ids in NCHW pixel order.
template <class T>
LossResult<T> weighted_cross_entropy(const Tensor4<T>& logits, const std::vector<std::uint8_t>& labels,
                                     const std::vector<double>& weights) {
    const int K = logits.c();
    const std::size_t hw = static_cast<std::size_t>(logits.h()) * logits.w();
    require(labels.size() == hw * logits.n(), ErrorKind::InvalidArgument,
            "loss: " + std::to_string(labels.size()) + " labels for logits " + logits.shape.str());
    require(static_cast<int>(weights.size()) == K, ErrorKind::InvalidArgument,
            "loss: " + std::to_string(weights.size()) + " class weights for " + std::to_string(K) + " classes");
    for (double w : weights) require(w > 0, ErrorKind::InvalidArgument, "loss: class weights must be positive");

    LossResult<T> r{T(0), Tensor4<T>(logits.shape)};
    double wsum = 0.0, acc = 0.0;
    std::vector<double> prob(K);
    for (int n = 0; n < logits.n(); ++n) {
        for (std::size_t i = 0; i < hw; ++i) {
            const int y = labels[n * hw + i];
            if (y >= K) {
                const int px = static_cast<int>(i % logits.w()), py = static_cast<int>(i / logits.w());
                fail(ErrorKind::InvalidInput, "loss: label " + std::to_string(y) + " at image " + std::to_string(n) +
                                                  " pixel (" + std::to_string(px) + "," + std::to_string(py) +
                                                  ") is not below num_classes " + std::to_string(K));
            }
            double mx = logits.plane(n, 0)[i];
            for (int c = 1; c < K; ++c) mx = std::max<double>(mx, logits.plane(n, c)[i]);
            double z = 0.0;
            for (int c = 0; c < K; ++c) z += (prob[c] = std::exp(static_cast<double>(logits.plane(n, c)[i]) - mx));
            for (int c = 0; c < K; ++c) prob[c] /= z;
            const double w = weights[y];
            wsum += w;
            acc -= w * (static_cast<double>(logits.plane(n, y)[i]) - mx - std::log(z));
            for (int c = 0; c < K; ++c) r.dlogits.plane(n, c)[i] = static_cast<T>(w * (prob[c] - (c == y ? 1.0 : 0.0)));
        }
    }
    r.loss = static_cast<T>(acc / wsum);
    const T inv = static_cast<T>(1.0 / wsum);
    for (auto& g : r.dlogits.data) g *= inv;
    return r;
}

} // namespace egoseg::net
