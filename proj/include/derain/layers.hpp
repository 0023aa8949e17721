#ifndef DERAIN_LAYERS_HPP
#define DERAIN_LAYERS_HPP

#include <cmath>
#include <string>
#include <utility>

#include "derain/autodiff.hpp"
#include "derain/rng.hpp"
#include "derain/tensor.hpp"

namespace derain {

template <typename T>
using NodeIdx = typename Graph<T>::Idx;

/// Convolution layer parameters. apply() binds them as trainable parameters,
/// apply_frozen() as constants (used when a network is evaluated inside the
/// other network's update).
template <typename T>
struct Conv {
    Tensor<T> w;  // (out_c, in_c, k*k)
    Tensor<T> b;  // (out_c, 1, 1)
    int stride = 1;
    bool has_bias = true;

    void init(int in_c, int out_c, int k, int stride_, Pcg32& rng, double gain, bool bias = true) {
        stride = stride_;
        has_bias = bias;
        const double stddev = std::sqrt(gain / (static_cast<double>(in_c) * k * k));
        w = random_normal<T>(out_c, in_c, k * k, rng, static_cast<T>(stddev));
        b = bias ? Tensor<T>::zeros(out_c, 1, 1) : Tensor<T>();
    }

    NodeIdx<T> apply(Graph<T>& g, NodeIdx<T> x) {
        return g.conv2d(x, g.param(w), has_bias ? g.param(b) : NodeIdx<T>(-1), stride);
    }
    NodeIdx<T> apply_frozen(Graph<T>& g, NodeIdx<T> x) const {
        return g.conv2d(x, g.frozen(w), has_bias ? g.frozen(b) : NodeIdx<T>(-1), stride);
    }

    template <typename F>
    void visit(const std::string& name, F&& f) {
        f(name + ".w", w);
        if (has_bias) f(name + ".b", b);
    }
};

template <typename T>
struct Fc {
    Tensor<T> w;  // (1, out, in)
    Tensor<T> b;  // (out, 1, 1)

    void init(int in_dim, int out_dim, Pcg32& rng, double gain) {
        const double stddev = std::sqrt(gain / static_cast<double>(in_dim));
        w = random_normal<T>(1, out_dim, in_dim, rng, static_cast<T>(stddev));
        b = Tensor<T>::zeros(out_dim, 1, 1);
    }

    NodeIdx<T> apply(Graph<T>& g, NodeIdx<T> x) { return g.fc(x, g.param(w), g.param(b)); }
    NodeIdx<T> apply_frozen(Graph<T>& g, NodeIdx<T> x) const { return g.fc(x, g.frozen(w), g.frozen(b)); }

    template <typename F>
    void visit(const std::string& name, F&& f) {
        f(name + ".w", w);
        f(name + ".b", b);
    }
};

}  // namespace derain

#endif
