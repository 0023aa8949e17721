#ifndef DERAIN_AUTODIFF_HPP
#define DERAIN_AUTODIFF_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "derain/errors.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Reverse-mode tape over Tensor<T> values.
///
/// A Graph is built once per forward pass: ops append nodes in topological
/// order and backward() replays them in reverse. Parameters are bound by
/// address via param(), so after backward() their gradients can be fetched
/// with grad_of() regardless of how the network composed them. Leaves created
/// with input() are constants: no gradient is ever propagated into them, and
/// expensive ops skip the corresponding work.
template <typename T>
class Graph {
  public:
    using Idx = std::int32_t;
    using MatrixRM = typename Tensor<T>::MatrixRM;
    using MatrixCM = typename Tensor<T>::MatrixCM;

    Graph() { nodes_.reserve(1024); }
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // ---- leaves ----

    Idx input(Tensor<T> v) { return push(std::move(v), false, nullptr); }

    Idx param(Tensor<T>& p) {
        auto it = bindings_.find(&p);
        if (it != bindings_.end()) return it->second;
        Idx id = push(p, true, nullptr);
        bindings_.emplace(&p, id);
        return id;
    }

    /// Leaf sharing a parameter's current value but treated as a constant
    /// (used when one network is evaluated inside another one's update).
    Idx frozen(const Tensor<T>& p) { return push(p, false, nullptr); }

    // ---- access ----

    const Tensor<T>& val(Idx i) const { return nodes_[i].val; }
    Tensor<T>& mutable_val(Idx i) { return nodes_[i].val; }
    T scalar(Idx i) const { return nodes_[i].val.v[0]; }
    bool requires_grad(Idx i) const { return nodes_[i].rg; }

    const Tensor<T>& grad(Idx i) {
        ensure_grad(i);
        return nodes_[i].grad;
    }

    const Tensor<T>* grad_of(const Tensor<T>& p) const {
        auto it = bindings_.find(&p);
        if (it == bindings_.end()) return nullptr;
        const Node& n = nodes_[it->second];
        return n.grad.empty() ? nullptr : &n.grad;
    }

    bool bound(const Tensor<T>& p) const { return bindings_.count(&p) != 0; }

    // ---- elementwise ----

    Idx add(Idx a, Idx b) {
        require_same_shape(nodes_[a].val, nodes_[b].val, "add");
        Tensor<T> out = nodes_[a].val;
        out.v += nodes_[b].val.v;
        return push(std::move(out), rg(a) || rg(b), [this, a, b](Idx self) {
            if (rg(a)) acc(a).v += nodes_[self].grad.v;
            if (rg(b)) acc(b).v += nodes_[self].grad.v;
        });
    }

    Idx sub(Idx a, Idx b) {
        require_same_shape(nodes_[a].val, nodes_[b].val, "sub");
        Tensor<T> out = nodes_[a].val;
        out.v -= nodes_[b].val.v;
        return push(std::move(out), rg(a) || rg(b), [this, a, b](Idx self) {
            if (rg(a)) acc(a).v += nodes_[self].grad.v;
            if (rg(b)) acc(b).v -= nodes_[self].grad.v;
        });
    }

    Idx mul(Idx a, Idx b) {
        require_same_shape(nodes_[a].val, nodes_[b].val, "mul");
        Tensor<T> out = nodes_[a].val;
        out.v *= nodes_[b].val.v;
        return push(std::move(out), rg(a) || rg(b), [this, a, b](Idx self) {
            if (rg(a)) acc(a).v += nodes_[self].grad.v * nodes_[b].val.v;
            if (rg(b)) acc(b).v += nodes_[self].grad.v * nodes_[a].val.v;
        });
    }

    Idx scale(Idx a, T k) {
        Tensor<T> out = nodes_[a].val;
        out.v *= k;
        return push(std::move(out), rg(a), [this, a, k](Idx self) {
            if (rg(a)) acc(a).v += nodes_[self].grad.v * k;
        });
    }

    Idx relu(Idx a) {
        Tensor<T> out = nodes_[a].val;
        out.v = out.v.cwiseMax(T(0));
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            acc(a).v += nodes_[self].grad.v * (nodes_[a].val.v > T(0)).template cast<T>();
        });
    }

    Idx sigmoid(Idx a) {
        Tensor<T> out = nodes_[a].val;
        out.v = T(1) / (T(1) + (-out.v).exp());
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            const auto& y = nodes_[self].val.v;
            acc(a).v += nodes_[self].grad.v * y * (T(1) - y);
        });
    }

    Idx tanh_act(Idx a) {
        Tensor<T> out = nodes_[a].val;
        out.v = out.v.tanh();
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            const auto& y = nodes_[self].val.v;
            acc(a).v += nodes_[self].grad.v * (T(1) - y * y);
        });
    }

    /// softplus(x) = log(1+e^x), evaluated in overflow-safe form. Together
    /// with sigmoid logits this gives stable -log D and log(1-D) terms.
    Idx softplus(Idx a) {
        Tensor<T> out = nodes_[a].val;
        out.v = out.v.cwiseMax(T(0)) + ((-out.v.abs()).exp() + T(1)).log();
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            const auto& x = nodes_[a].val.v;
            acc(a).v += nodes_[self].grad.v * (T(1) / (T(1) + (-x).exp()));
        });
    }

    /// Clamp to [0,1] in the forward pass while passing gradients straight
    /// through, so saturated pixels keep receiving a training signal.
    Idx clamp01_pass(Idx a) {
        Tensor<T> out = nodes_[a].val;
        out.v = out.v.cwiseMax(T(0)).cwiseMin(T(1));
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            acc(a).v += nodes_[self].grad.v;
        });
    }

    // ---- structure ----

    Idx concat_c(Idx a, Idx b) {
        Tensor<T> out = concat_channels(nodes_[a].val, nodes_[b].val);
        return push(std::move(out), rg(a) || rg(b), [this, a, b](Idx self) {
            const auto& g = nodes_[self].grad.v;
            Eigen::Index na = nodes_[a].val.size();
            if (rg(a)) acc(a).v += g.head(na);
            if (rg(b)) acc(b).v += g.tail(nodes_[b].val.size());
        });
    }

    Idx slice_c(Idx a, int from, int count) {
        const Tensor<T>& x = nodes_[a].val;
        if (from < 0 || from + count > x.c) throw shape_error("slice_c: channel range out of bounds");
        Tensor<T> out(count, x.h, x.w);
        out.v = x.v.segment(static_cast<Eigen::Index>(from) * x.plane(), out.size());
        return push(std::move(out), rg(a), [this, a, from, count](Idx self) {
            if (!rg(a)) return;
            Eigen::Index plane = nodes_[a].val.plane();
            acc(a).v.segment(static_cast<Eigen::Index>(from) * plane, static_cast<Eigen::Index>(count) * plane) +=
                nodes_[self].grad.v;
        });
    }

    /// Multiply every channel of x by a single-channel map.
    Idx mul_bcast(Idx x, Idx m) {
        const Tensor<T>& xv = nodes_[x].val;
        const Tensor<T>& mv = nodes_[m].val;
        require_spatial_match(xv, mv, "mul_bcast");
        require_channels(mv, 1, "mul_bcast");
        Tensor<T> out(xv.c, xv.h, xv.w);
        const Eigen::Index p = xv.plane();
        for (int ch = 0; ch < xv.c; ++ch) out.v.segment(ch * p, p) = xv.v.segment(ch * p, p) * mv.v;
        return push(std::move(out), rg(x) || rg(m), [this, x, m](Idx self) {
            const auto& g = nodes_[self].grad.v;
            const Tensor<T>& xv = nodes_[x].val;
            const Tensor<T>& mv = nodes_[m].val;
            const Eigen::Index p = xv.plane();
            if (rg(x)) {
                auto& gx = acc(x).v;
                for (int ch = 0; ch < xv.c; ++ch) gx.segment(ch * p, p) += g.segment(ch * p, p) * mv.v;
            }
            if (rg(m)) {
                auto& gm = acc(m).v;
                for (int ch = 0; ch < xv.c; ++ch) gm += g.segment(ch * p, p) * xv.v.segment(ch * p, p);
            }
        });
    }

    Idx upsample_nearest2(Idx a) {
        const Tensor<T>& x = nodes_[a].val;
        Tensor<T> out(x.c, x.h * 2, x.w * 2);
        for (int ch = 0; ch < x.c; ++ch)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx) out.at(ch, y, xx) = x.at(ch, y / 2, xx / 2);
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            const Tensor<T>& g = nodes_[self].grad;
            Tensor<T>& gx = acc(a);
            for (int ch = 0; ch < gx.c; ++ch)
                for (int y = 0; y < g.h; ++y)
                    for (int xx = 0; xx < g.w; ++xx) gx.at(ch, y / 2, xx / 2) += g.at(ch, y, xx);
        });
    }

    /// Bilinear resize with half-pixel centers (both up and down).
    Idx resize_bilinear(Idx a, int oh, int ow) {
        const Tensor<T>& x = nodes_[a].val;
        auto taps = bilinear_taps(x.h, x.w, oh, ow);
        Tensor<T> out(x.c, oh, ow);
        for (int ch = 0; ch < x.c; ++ch)
            for (int y = 0; y < oh; ++y) {
                const auto& ty = taps.first[y];
                for (int xx = 0; xx < ow; ++xx) {
                    const auto& tx = taps.second[xx];
                    out.at(ch, y, xx) = static_cast<T>(
                        (x.at(ch, ty.i0, tx.i0) * (1 - tx.f) + x.at(ch, ty.i0, tx.i1) * tx.f) * (1 - ty.f) +
                        (x.at(ch, ty.i1, tx.i0) * (1 - tx.f) + x.at(ch, ty.i1, tx.i1) * tx.f) * ty.f);
                }
            }
        return push(std::move(out), rg(a), [this, a, oh, ow](Idx self) {
            if (!rg(a)) return;
            const Tensor<T>& g = nodes_[self].grad;
            Tensor<T>& gx = acc(a);
            auto taps = bilinear_taps(gx.h, gx.w, oh, ow);
            for (int ch = 0; ch < gx.c; ++ch)
                for (int y = 0; y < oh; ++y) {
                    const auto& ty = taps.first[y];
                    for (int xx = 0; xx < ow; ++xx) {
                        const auto& tx = taps.second[xx];
                        T gv = g.at(ch, y, xx);
                        gx.at(ch, ty.i0, tx.i0) += gv * static_cast<T>((1 - ty.f) * (1 - tx.f));
                        gx.at(ch, ty.i0, tx.i1) += gv * static_cast<T>((1 - ty.f) * tx.f);
                        gx.at(ch, ty.i1, tx.i0) += gv * static_cast<T>(ty.f * (1 - tx.f));
                        gx.at(ch, ty.i1, tx.i1) += gv * static_cast<T>(ty.f * tx.f);
                    }
                }
        });
    }

    // ---- linear maps ----

    /// 2D convolution, zero padding k/2 ("same" for stride 1), square kernel.
    /// Weight tensor layout: (out_c, in_c, k*k); bias (out_c,1,1) or -1.
    Idx conv2d(Idx x, Idx w, Idx b, int stride = 1) {
        const Tensor<T>& xv = nodes_[x].val;
        const Tensor<T>& wv = nodes_[w].val;
        const int k = kernel_size(wv);
        if (wv.h != xv.c)
            throw shape_error("conv2d: weight expects " + std::to_string(wv.h) + " input channels, got " +
                              std::to_string(xv.c));
        const int pad = k / 2;
        const int oh = (xv.h + 2 * pad - k) / stride + 1;
        const int ow = (xv.w + 2 * pad - k) / stride + 1;
        const Eigen::Index K = static_cast<Eigen::Index>(xv.c) * k * k;
        const Eigen::Index P = static_cast<Eigen::Index>(oh) * ow;

        MatrixCM cols;
        im2col(xv, k, stride, pad, oh, ow, cols);
        Tensor<T> out(wv.c, oh, ow);
        // out memory viewed as P x out_c col-major equals channel-major layout.
        Eigen::Map<MatrixCM> y(out.v.data(), P, wv.c);
        Eigen::Map<const MatrixRM> W(wv.v.data(), wv.c, K);
        y.noalias() = cols.transpose() * W.transpose();
        if (b >= 0) {
            const Tensor<T>& bv = nodes_[b].val;
            y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bv.v.data(), wv.c);
        }
        bool needs = rg(x) || rg(w) || (b >= 0 && rg(b));
        return push(std::move(out), needs, [this, x, w, b, stride, k, oh, ow](Idx self) {
            const Tensor<T>& xv = nodes_[x].val;
            const Tensor<T>& wv = nodes_[w].val;
            const int pad = k / 2;
            const Eigen::Index K = static_cast<Eigen::Index>(xv.c) * k * k;
            const Eigen::Index P = static_cast<Eigen::Index>(oh) * ow;
            Eigen::Map<const MatrixCM> gy(nodes_[self].grad.v.data(), P, wv.c);
            Eigen::Map<const MatrixRM> W(wv.v.data(), wv.c, K);
            if (rg(w) || rg(x)) {
                if (rg(w)) {
                    MatrixCM cols;
                    im2col(xv, k, stride, pad, oh, ow, cols);
                    Eigen::Map<MatrixRM> gW(acc(w).v.data(), wv.c, K);
                    gW.noalias() += gy.transpose() * cols.transpose();
                }
                if (rg(x)) {
                    MatrixCM dcols(K, P);
                    dcols.noalias() = W.transpose() * gy.transpose();
                    col2im_add(dcols, k, stride, pad, oh, ow, acc(x));
                }
            }
            if (b >= 0 && rg(b)) {
                Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(acc(b).v.data(), wv.c);
                gb.noalias() += gy.colwise().sum();
            }
        });
    }

    /// Fully connected layer on the flattened input. Weight (1, out, in).
    Idx fc(Idx x, Idx w, Idx b) {
        const Tensor<T>& xv = nodes_[x].val;
        const Tensor<T>& wv = nodes_[w].val;
        if (wv.w != xv.size())
            throw shape_error("fc: weight expects input of size " + std::to_string(wv.w) + ", got " +
                              std::to_string(xv.size()));
        Tensor<T> out(wv.h, 1, 1);
        Eigen::Map<const MatrixRM> W(wv.v.data(), wv.h, wv.w);
        out.v.matrix().noalias() = W * xv.v.matrix();
        if (b >= 0) out.v += nodes_[b].val.v;
        bool needs = rg(x) || rg(w) || (b >= 0 && rg(b));
        return push(std::move(out), needs, [this, x, w, b](Idx self) {
            const Tensor<T>& xv = nodes_[x].val;
            const Tensor<T>& wv = nodes_[w].val;
            const auto& g = nodes_[self].grad.v;
            Eigen::Map<const MatrixRM> W(wv.v.data(), wv.h, wv.w);
            if (rg(w)) {
                Eigen::Map<MatrixRM> gW(acc(w).v.data(), wv.h, wv.w);
                gW.noalias() += g.matrix() * xv.v.matrix().transpose();
            }
            if (rg(x)) acc(x).v.matrix().noalias() += W.transpose() * g.matrix();
            if (b >= 0 && rg(b)) acc(b).v += g;
        });
    }

    // ---- reductions ----

    Idx mean_all(Idx a) {
        const Tensor<T>& x = nodes_[a].val;
        Tensor<T> out = Tensor<T>::scalar(x.v.mean());
        return push(std::move(out), rg(a), [this, a](Idx self) {
            if (!rg(a)) return;
            Tensor<T>& gx = acc(a);
            gx.v += nodes_[self].grad.v[0] / static_cast<T>(gx.size());
        });
    }

    /// Mean squared error over all elements -> scalar node.
    Idx mse(Idx a, Idx b) {
        require_same_shape(nodes_[a].val, nodes_[b].val, "mse");
        const auto& av = nodes_[a].val.v;
        const auto& bv = nodes_[b].val.v;
        Tensor<T> out = Tensor<T>::scalar((av - bv).square().mean());
        return push(std::move(out), rg(a) || rg(b), [this, a, b](Idx self) {
            T g = nodes_[self].grad.v[0];
            const auto& av = nodes_[a].val.v;
            const auto& bv = nodes_[b].val.v;
            T k = g * T(2) / static_cast<T>(av.size());
            if (rg(a)) acc(a).v += k * (av - bv);
            if (rg(b)) acc(b).v -= k * (av - bv);
        });
    }

    /// Weighted sum of scalar nodes.
    Idx wsum(const std::vector<std::pair<Idx, T>>& terms) {
        T s = 0;
        for (const auto& [i, kf] : terms) s += kf * nodes_[i].val.v[0];
        bool needs = false;
        for (const auto& [i, kf] : terms) needs = needs || rg(i);
        std::vector<std::pair<Idx, T>> copy = terms;
        return push(Tensor<T>::scalar(s), needs, [this, copy](Idx self) {
            T g = nodes_[self].grad.v[0];
            for (const auto& [i, kf] : copy)
                if (rg(i)) acc(i).v[0] += g * kf;
        });
    }

    // ---- backward ----

    void backward(Idx root) {
        if (nodes_[root].val.size() != 1) throw shape_error("backward: root must be scalar");
        ensure_grad(root);
        nodes_[root].grad.v[0] = T(1);
        for (Idx i = root; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back && !n.grad.empty()) n.back(i);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad;
        bool rg = false;
        std::function<void(Idx)> back;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor<T>*, Idx> bindings_;

    bool rg(Idx i) const { return nodes_[i].rg; }

    Idx push(Tensor<T> v, bool needs_grad, std::function<void(Idx)> back) {
        nodes_.push_back(Node{std::move(v), Tensor<T>(), needs_grad, std::move(back)});
        return static_cast<Idx>(nodes_.size() - 1);
    }

    void ensure_grad(Idx i) {
        Node& n = nodes_[i];
        if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.val.c, n.val.h, n.val.w);
    }

    Tensor<T>& acc(Idx i) {
        ensure_grad(i);
        return nodes_[i].grad;
    }

    static int kernel_size(const Tensor<T>& w) {
        int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(w.w))));
        if (k * k != w.w) throw shape_error("conv2d: weight kernel dim is not a square");
        return k;
    }

    /// cols: (in_c*k*k) x (oh*ow) col-major; column p is the receptive field
    /// of output pixel p, rows ordered (ic, ky, kx). Zero padding.
    static void im2col(const Tensor<T>& x, int k, int stride, int pad, int oh, int ow, MatrixCM& cols) {
        const Eigen::Index K = static_cast<Eigen::Index>(x.c) * k * k;
        cols.resize(K, static_cast<Eigen::Index>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T* col = cols.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * K;
                const int iy0 = oy * stride - pad;
                const int ix0 = ox * stride - pad;
                Eigen::Index r = 0;
                for (int ic = 0; ic < x.c; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= x.h) {
                            for (int kx = 0; kx < k; ++kx) col[r++] = T(0);
                            continue;
                        }
                        const T* row = x.v.data() + (static_cast<Eigen::Index>(ic) * x.h + iy) * x.w;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ix0 + kx;
                            col[r++] = (ix < 0 || ix >= x.w) ? T(0) : row[ix];
                        }
                    }
            }
        }
    }

    static void col2im_add(const MatrixCM& cols, int k, int stride, int pad, int oh, int ow, Tensor<T>& gx) {
        const Eigen::Index K = static_cast<Eigen::Index>(gx.c) * k * k;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const T* col = cols.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * K;
                const int iy0 = oy * stride - pad;
                const int ix0 = ox * stride - pad;
                Eigen::Index r = 0;
                for (int ic = 0; ic < gx.c; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= gx.h) {
                            r += k;
                            continue;
                        }
                        T* row = gx.v.data() + (static_cast<Eigen::Index>(ic) * gx.h + iy) * gx.w;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix >= 0 && ix < gx.w) row[ix] += col[r];
                            ++r;
                        }
                    }
            }
        }
    }

    struct Tap {
        int i0, i1;
        double f;
    };

    static std::pair<std::vector<Tap>, std::vector<Tap>> bilinear_taps(int ih, int iw, int oh, int ow) {
        auto axis = [](int in, int out) {
            std::vector<Tap> taps(out);
            const double scale = static_cast<double>(in) / out;
            for (int o = 0; o < out; ++o) {
                double s = (o + 0.5) * scale - 0.5;
                s = std::min(std::max(s, 0.0), static_cast<double>(in - 1));
                int i0 = static_cast<int>(std::floor(s));
                taps[o] = Tap{i0, std::min(i0 + 1, in - 1), s - i0};
            }
            return taps;
        };
        return {axis(ih, oh), axis(iw, ow)};
    }
};

}  // namespace derain

#endif
