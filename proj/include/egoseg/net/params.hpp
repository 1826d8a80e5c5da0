#pragma once

#include <cmath>
#include <map>
#include <string>

#include "egoseg/net/tensor.hpp"
#include "egoseg/rng.hpp"

namespace egoseg::net {

enum class ParamKind : std::uint8_t { ConvWeight, DeconvWeight, Bias, BnGamma, BnBeta, BnMean, BnVar };

inline bool trainable(ParamKind k) { return k != ParamKind::BnMean && k != ParamKind::BnVar; }
inline bool decays(ParamKind k) { return k == ParamKind::ConvWeight || k == ParamKind::DeconvWeight; }

template <class T>
struct ParamEntry {
    ParamKind kind = ParamKind::ConvWeight;
    Tensor4<T> value;
    Tensor4<T> grad; // same shape as value once training starts
    Tensor4<T> m, v; // Adam moments

    void zero_grad() {
        if (grad.shape != value.shape) grad = Tensor4<T>(value.shape);
        else grad.fill(T(0));
    }
};

/// Named flat parameter map; std::map keeps iteration (and therefore init and file order) stable.
template <class T>
struct Params {
    std::map<std::string, ParamEntry<T>> entries;

    ParamEntry<T>& at(const std::string& name) {
        auto it = entries.find(name);
        require(it != entries.end(), ErrorKind::InvalidArgument, "unknown parameter '" + name + "'");
        return it->second;
    }
    const ParamEntry<T>& at(const std::string& name) const {
        auto it = entries.find(name);
        require(it != entries.end(), ErrorKind::InvalidArgument, "unknown parameter '" + name + "'");
        return it->second;
    }
    bool contains(const std::string& name) const { return entries.count(name) != 0; }

    void zero_grad() {
        for (auto& [_, e] : entries)
            if (trainable(e.kind)) e.zero_grad();
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [_, e] : entries) n += e.value.size();
        return n;
    }

    template <class U>
    Params<U> cast() const {
        Params<U> out;
        for (const auto& [name, e] : entries) {
            ParamEntry<U> d;
            d.kind = e.kind;
            d.value = e.value.template cast<U>();
            out.entries.emplace(name, std::move(d));
        }
        return out;
    }
};

/// Fresh value for one entry: He-normal for conv/deconv weights, gamma 1, everything else 0
/// (running variance 1).
template <class T>
void init_entry(ParamEntry<T>& e, Rng& rng) {
    switch (e.kind) {
    case ParamKind::ConvWeight:
    case ParamKind::DeconvWeight: {
        const Shape4 s = e.value.shape;
        // conv (Cout,Cin,k,k): fan_in = Cin*k*k; stride-2 deconv (Cin,Cout,k,k): each output sees Cin*(k/2)^2 taps.
        const double fan_in = e.kind == ParamKind::ConvWeight ? static_cast<double>(s.c) * s.h * s.w
                                                               : static_cast<double>(s.n) * s.h * s.w / 4.0;
        const double sd = std::sqrt(2.0 / std::max(1.0, fan_in));
        for (auto& x : e.value.data) x = static_cast<T>(sd * rng.normal());
        break;
    }
    case ParamKind::BnGamma:
    case ParamKind::BnVar: e.value.fill(T(1)); break;
    default: e.value.fill(T(0)); break;
    }
}

} // namespace egoseg::net
