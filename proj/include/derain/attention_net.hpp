#ifndef DERAIN_ATTENTION_NET_HPP
#define DERAIN_ATTENTION_NET_HPP

#include <cmath>
#include <string>
#include <vector>

#include "derain/config.hpp"
#include "derain/layers.hpp"

namespace derain {

/// One recurrent block: residual feature extractor over [image (+) previous
/// attention map], a convolutional LSTM, and the two-conv attention head.
template <typename T>
struct AttentionStep {
    Conv<T> in_conv;  // 4 -> c_feat
    std::vector<std::pair<Conv<T>, Conv<T>>> res;
    Conv<T> lstm_x;  // c_feat -> 4*c_lstm, carries the gate biases
    Conv<T> lstm_h;  // c_lstm -> 4*c_lstm, no bias
    Tensor<T> peep_i, peep_f, peep_o;  // per-channel-per-pixel Hadamard weights
    Conv<T> att1, att2;

    void init(const ModelConfig& cfg, Pcg32& rng) {
        in_conv.init(4, cfg.c_feat, 3, 1, rng, 2.0);
        res.resize(cfg.n_res);
        for (auto& blk : res) {
            blk.first.init(cfg.c_feat, cfg.c_feat, 3, 1, rng, 2.0);
            blk.second.init(cfg.c_feat, cfg.c_feat, 3, 1, rng, 2.0);
        }
        lstm_x.init(cfg.c_feat, 4 * cfg.c_lstm, 3, 1, rng, 1.0);
        lstm_h.init(cfg.c_lstm, 4 * cfg.c_lstm, 3, 1, rng, 1.0, /*bias=*/false);
        // forget-gate bias starts at 1 so early training keeps cell memory
        for (int ch = cfg.c_lstm; ch < 2 * cfg.c_lstm; ++ch) lstm_x.b.at(ch, 0, 0) = T(1);
        peep_i = Tensor<T>::zeros(cfg.c_lstm, cfg.in_h, cfg.in_w);
        peep_f = Tensor<T>::zeros(cfg.c_lstm, cfg.in_h, cfg.in_w);
        peep_o = Tensor<T>::zeros(cfg.c_lstm, cfg.in_h, cfg.in_w);
        att1.init(cfg.c_lstm, cfg.att_mid, 3, 1, rng, 2.0);
        att2.init(cfg.att_mid, 1, 3, 1, rng, 1.0);
    }

    template <typename F>
    void visit(const std::string& p, F&& f) {
        in_conv.visit(p + ".in", f);
        for (std::size_t i = 0; i < res.size(); ++i) {
            res[i].first.visit(p + ".res" + std::to_string(i) + ".c1", f);
            res[i].second.visit(p + ".res" + std::to_string(i) + ".c2", f);
        }
        lstm_x.visit(p + ".lstm_x", f);
        lstm_h.visit(p + ".lstm_h", f);
        f(p + ".peep_i", peep_i);
        f(p + ".peep_f", peep_f);
        f(p + ".peep_o", peep_o);
        att1.visit(p + ".att1", f);
        att2.visit(p + ".att2", f);
    }
};

/// The attentive-recurrent network. Weights are shared across time steps by
/// default (share_recurrent); the parameter count is then independent of N.
template <typename T>
struct AttentionNet {
    using Idx = NodeIdx<T>;

    ModelConfig cfg;
    std::vector<AttentionStep<T>> steps;

    void init(const ModelConfig& c, Pcg32& rng) {
        cfg = c;
        steps.resize(c.share_recurrent ? 1 : c.n_steps);
        for (auto& s : steps) s.init(c, rng);
    }

    AttentionStep<T>& step(int t) {
        const std::size_t i = cfg.share_recurrent ? 0 : static_cast<std::size_t>(t);
        if (i >= steps.size())
            throw shape_error("attention step " + std::to_string(t) + " exceeds the unshared stack of " +
                              std::to_string(steps.size()));
        return steps[i];
    }

    /// Five stacked residual blocks over the 4-channel input (after a lifting
    /// conv): out = relu(x + conv2(relu(conv1(x)))).
    Idx residual_features(Graph<T>& g, Idx x, int t = 0) {
        require_channels(g.val(x), 4, "residual_features");
        AttentionStep<T>& s = step(t);
        Idx h = g.relu(s.in_conv.apply(g, x));
        for (auto& blk : s.res) {
            Idx y = g.relu(blk.first.apply(g, h));
            h = g.relu(g.add(blk.second.apply(g, y), h));
        }
        return h;
    }

    struct State {
        Idx h, c;
    };

    State zero_state(Graph<T>& g, int height, int width) {
        return {g.input(Tensor<T>::zeros(cfg.c_lstm, height, width)),
                g.input(Tensor<T>::zeros(cfg.c_lstm, height, width))};
    }

    /// One convolutional LSTM update:
    ///   i = sig(Wxi*X + Whi*H + Wci.C + bi)     f = sig(Wxf*X + Whf*H + Wcf.C + bf)
    ///   C' = f.C + i.tanh(Wxc*X + Whc*H + bc)   o = sig(Wxo*X + Who*H + Wco.C' + bo)
    ///   H' = o.tanh(C')
    /// Gate channel packing in lstm_x/lstm_h: [i, f, candidate, o].
    State lstm_step(Graph<T>& g, Idx x, State state, int t = 0) {
        const Tensor<T>& xv = g.val(x);
        require_channels(xv, cfg.c_feat, "lstm_step");
        require_same_shape(g.val(state.h), g.val(state.c), "lstm_step state");
        require_spatial_match(xv, g.val(state.h), "lstm_step");
        AttentionStep<T>& s = step(t);
        const int C = cfg.c_lstm;
        Idx pre = g.add(s.lstm_x.apply(g, x), s.lstm_h.apply(g, state.h));
        Idx i = g.sigmoid(g.add(g.slice_c(pre, 0, C), g.mul(g.param(s.peep_i), state.c)));
        Idx f = g.sigmoid(g.add(g.slice_c(pre, C, C), g.mul(g.param(s.peep_f), state.c)));
        Idx cand = g.tanh_act(g.slice_c(pre, 2 * C, C));
        Idx c_t = g.add(g.mul(f, state.c), g.mul(i, cand));
        Idx o = g.sigmoid(g.add(g.slice_c(pre, 3 * C, C), g.mul(g.param(s.peep_o), c_t)));
        Idx h_t = g.mul(o, g.tanh_act(c_t));
        return {h_t, c_t};
    }

    /// Two 3x3 convolutions down to one channel, squashed into [0,1].
    Idx attention_head(Graph<T>& g, Idx h, int t = 0) {
        AttentionStep<T>& s = step(t);
        return g.sigmoid(s.att2.apply(g, g.relu(s.att1.apply(g, h))));
    }

    struct Rollout {
        std::vector<Idx> maps;  // A_1..A_N
        State final_state;
    };

    /// N recurrent steps starting from a uniform 0.5 attention map and a zero
    /// LSTM state; each step consumes [image (+) previous map].
    Rollout rollout(Graph<T>& g, Idx image, int n) {
        const Tensor<T>& img = g.val(image);
        require_channels(img, 3, "rollout");
        if (img.h != cfg.in_h || img.w != cfg.in_w)
            throw shape_error("rollout: model was built for " + std::to_string(cfg.in_h) + "x" +
                              std::to_string(cfg.in_w) + ", got " + std::to_string(img.h) + "x" +
                              std::to_string(img.w));
        if (n < 1) throw shape_error("rollout: need at least one time step");
        Rollout out;
        Idx prev_map = g.input(Tensor<T>::full(1, img.h, img.w, T(0.5)));
        State state = zero_state(g, img.h, img.w);
        for (int t = 0; t < n; ++t) {
            Idx feat = residual_features(g, g.concat_c(image, prev_map), t);
            state = lstm_step(g, feat, state, t);
            Idx a_t = attention_head(g, state.h, t);
            out.maps.push_back(a_t);
            prev_map = a_t;
        }
        out.final_state = state;
        return out;
    }

    template <typename F>
    void visit_params(F&& f, const std::string& prefix = "att") {
        for (std::size_t i = 0; i < steps.size(); ++i)
            steps[i].visit(prefix + (cfg.share_recurrent ? "" : ".t" + std::to_string(i)), f);
    }
};

/// L_ATT = sum_t theta^(N-t) * MSE(A_t, M), graph form.
template <typename T>
NodeIdx<T> attention_loss_node(Graph<T>& g, const std::vector<NodeIdx<T>>& maps, NodeIdx<T> mask, T theta) {
    const int n = static_cast<int>(maps.size());
    std::vector<std::pair<NodeIdx<T>, T>> terms;
    for (int t = 1; t <= n; ++t)
        terms.emplace_back(g.mse(maps[t - 1], mask), static_cast<T>(std::pow(theta, n - t)));
    return g.wsum(terms);
}

/// Same quantity on plain tensors (evaluation path).
template <typename T>
T attention_loss(const std::vector<Tensor<T>>& maps, const Tensor<T>& mask, T theta) {
    const int n = static_cast<int>(maps.size());
    T total = 0;
    for (int t = 1; t <= n; ++t) {
        require_same_shape(maps[t - 1], mask, "attention_loss");
        T mse = (maps[t - 1].v - mask.v).square().mean();
        total += static_cast<T>(std::pow(theta, n - t)) * mse;
    }
    return total;
}

}  // namespace derain

#endif
