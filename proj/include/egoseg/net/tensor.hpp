#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "egoseg/error.hpp"

namespace egoseg::net {

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t count() const { return static_cast<std::size_t>(n) * c * h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

/// Dense NCHW tensor, row-major.
template <class T>
struct Tensor4 {
    Shape4 shape;
    std::vector<T> data;

    Tensor4() = default;
    explicit Tensor4(Shape4 s, T fill = T(0)) : shape(s), data(s.count(), fill) {}
    Tensor4(int n, int c, int h, int w, T fill = T(0)) : Tensor4(Shape4{n, c, h, w}, fill) {}

    int n() const { return shape.n; }
    int c() const { return shape.c; }
    int h() const { return shape.h; }
    int w() const { return shape.w; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t index(int in, int ic, int ih, int iw) const {
        return ((static_cast<std::size_t>(in) * shape.c + ic) * shape.h + ih) * shape.w + iw;
    }
    T& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
    T at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }

    /// Pointer to the (n, c) plane.
    T* plane(int in, int ic) { return data.data() + index(in, ic, 0, 0); }
    const T* plane(int in, int ic) const { return data.data() + index(in, ic, 0, 0); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
    }
};

inline void require_shape(bool ok, const std::string& op, const Shape4& a, const Shape4& b) {
    require(ok, ErrorKind::InvalidArgument, op + ": shape mismatch " + a.str() + " vs " + b.str());
}

} // namespace egoseg::net
