#ifndef DERAIN_TENSOR_HPP
#define DERAIN_TENSOR_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "derain/errors.hpp"
#include "derain/rng.hpp"

namespace derain {

/// Dense rank-3 tensor (channels x height x width), row-major within each
/// channel, channels contiguous. This is the one value type everything in the
/// library moves around: images are 3xHxW, masks and attention maps 1xHxW,
/// conv weights (out_c x in_c x k*k), scalars 1x1x1.
template <typename T>
struct Tensor {
    using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
    using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

    int c = 0, h = 0, w = 0;
    Array v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_) {
        if (c_ < 1 || h_ < 1 || w_ < 1)
            throw shape_error("tensor dimensions must be positive, got " + std::to_string(c_) + "x" +
                              std::to_string(h_) + "x" + std::to_string(w_));
        v = Array::Zero(static_cast<Eigen::Index>(c_) * h_ * w_);
    }

    static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }

    static Tensor full(int c, int h, int w, T value) {
        Tensor t(c, h, w);
        t.v.setConstant(value);
        return t;
    }

    static Tensor scalar(T value) { return full(1, 1, 1, value); }

    Eigen::Index size() const { return v.size(); }
    bool empty() const { return v.size() == 0; }
    int plane() const { return h * w; }

    T& at(int ch, int y, int x) { return v[(static_cast<Eigen::Index>(ch) * h + y) * w + x]; }
    T at(int ch, int y, int x) const { return v[(static_cast<Eigen::Index>(ch) * h + y) * w + x]; }

    /// h x w view of one channel.
    Eigen::Map<MatrixRM> channel(int ch) {
        return Eigen::Map<MatrixRM>(v.data() + static_cast<Eigen::Index>(ch) * plane(), h, w);
    }
    Eigen::Map<const MatrixRM> channel(int ch) const {
        return Eigen::Map<const MatrixRM>(v.data() + static_cast<Eigen::Index>(ch) * plane(), h, w);
    }

    /// c x (h*w) view; memory is channel-major so this is a row-major map.
    Eigen::Map<MatrixRM> as_rows() { return Eigen::Map<MatrixRM>(v.data(), c, plane()); }
    Eigen::Map<const MatrixRM> as_rows() const { return Eigen::Map<const MatrixRM>(v.data(), c, plane()); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.c = c;
        out.h = h;
        out.w = w;
        out.v = v.template cast<U>();
        return out;
    }
};

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
    if (!a.same_shape(b))
        throw shape_error(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
inline void require_spatial_match(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
    if (a.h != b.h || a.w != b.w)
        throw shape_error(std::string(where) + ": spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
inline void require_channels(const Tensor<T>& a, int c, const char* where) {
    if (a.c != c)
        throw shape_error(std::string(where) + ": expected " + std::to_string(c) + " channels, got " +
                          std::to_string(a.c));
}

template <typename T>
inline Tensor<T> clamp01(Tensor<T> x) {
    x.v = x.v.cwiseMax(T(0)).cwiseMin(T(1));
    return x;
}

template <typename T>
inline bool all_finite(const Tensor<T>& x) {
    return x.v.isFinite().all();
}

template <typename T>
inline Tensor<T> random_normal(int c, int h, int w, Pcg32& rng, T stddev) {
    Tensor<T> t(c, h, w);
    for (Eigen::Index i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<T>(rng.normal() * static_cast<double>(stddev));
    return t;
}

template <typename T>
inline Tensor<T> random_uniform(int c, int h, int w, Pcg32& rng, T lo = T(0), T hi = T(1)) {
    Tensor<T> t(c, h, w);
    for (Eigen::Index i = 0; i < t.v.size(); ++i)
        t.v[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

/// Channel concatenation (same spatial size).
template <typename T>
inline Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require_spatial_match(a, b, "concat_channels");
    Tensor<T> out(a.c + b.c, a.h, a.w);
    out.v.head(a.v.size()) = a.v;
    out.v.tail(b.v.size()) = b.v;
    return out;
}

/// Exact area-average downscale by an integer factor; each output pixel is the
/// mean of its factor x factor block. Used for multi-scale ground truths.
template <typename T>
inline Tensor<T> area_downscale(const Tensor<T>& x, int factor) {
    if (factor <= 0 || x.h % factor != 0 || x.w % factor != 0)
        throw shape_error("area_downscale: size " + x.shape_str() + " not divisible by " + std::to_string(factor));
    if (factor == 1) return x;
    Tensor<T> out(x.c, x.h / factor, x.w / factor);
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (int ch = 0; ch < x.c; ++ch)
        for (int y = 0; y < out.h; ++y)
            for (int xx = 0; xx < out.w; ++xx) {
                T s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += x.at(ch, y * factor + dy, xx * factor + dx);
                out.at(ch, y, xx) = s * inv;
            }
    return out;
}

/// Bilinear sample with clamped borders, half-pixel centers.
template <typename T>
inline T bilinear_sample(const Tensor<T>& x, int ch, double sy, double sx) {
    sy = std::min(std::max(sy, 0.0), static_cast<double>(x.h - 1));
    sx = std::min(std::max(sx, 0.0), static_cast<double>(x.w - 1));
    int y0 = static_cast<int>(std::floor(sy));
    int x0 = static_cast<int>(std::floor(sx));
    int y1 = std::min(y0 + 1, x.h - 1);
    int x1 = std::min(x0 + 1, x.w - 1);
    double fy = sy - y0, fx = sx - x0;
    double v00 = x.at(ch, y0, x0), v01 = x.at(ch, y0, x1);
    double v10 = x.at(ch, y1, x0), v11 = x.at(ch, y1, x1);
    return static_cast<T>((v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy);
}

/// Separable Gaussian blur with reflected borders; sigma <= 0 is the identity.
template <typename T>
inline Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma) {
    if (sigma <= 0.0) return x;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& kv : k) kv /= sum;

    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return std::min(std::max(i, 0), n - 1);
    };

    Tensor<T> tmp(x.c, x.h, x.w), out(x.c, x.h, x.w);
    for (int ch = 0; ch < x.c; ++ch) {
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) s += k[i + radius] * x.at(ch, y, reflect(xx + i, x.w));
                tmp.at(ch, y, xx) = static_cast<T>(s);
            }
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(ch, reflect(y + i, x.h), xx);
                out.at(ch, y, xx) = static_cast<T>(s);
            }
    }
    return out;
}

}  // namespace derain

#endif
