#ifndef DERAIN_DISCRIMINATOR_HPP
#define DERAIN_DISCRIMINATOR_HPP

#include <array>
#include <string>

#include "derain/config.hpp"
#include "derain/layers.hpp"

namespace derain {

/// Discriminator: seven conv-relu blocks, then two fully connected layers to
/// a single real/fake logit. In attentive mode a two-conv branch off the
/// fifth block predicts a single-channel map (where the raindrops are) that
/// multiplicatively gates the features before the remaining blocks.
template <typename T>
struct Discriminator {
    using Idx = NodeIdx<T>;

    ModelConfig cfg;
    bool attentive = true;
    std::array<Conv<T>, 7> convs;
    Conv<T> map1, map2;
    Fc<T> fc1, fc2;
    int map_h = 0, map_w = 0;  // resolution of the map branch (tap resolution)

    void init(const ModelConfig& c, bool attentive_, Pcg32& rng) {
        cfg = c;
        attentive = attentive_;
        const auto& dw = c.d_widths;
        const std::array<int, 7> strides = {2, 2, 1, 2, 1, 2, 2};
        int in_c = 3;
        for (int i = 0; i < 7; ++i) {
            convs[i].init(in_c, dw[i], 3, strides[i], rng, 2.0);
            in_c = dw[i];
        }
        if (attentive) {
            map1.init(dw[4], c.d_map_mid, 3, 1, rng, 2.0);
            map2.init(c.d_map_mid, 1, 3, 1, rng, 1.0);
        }
        int h = c.in_h, w = c.in_w;
        for (int i = 0; i < 5; ++i) {
            h = conv_out(h, strides[i]);
            w = conv_out(w, strides[i]);
        }
        map_h = h;
        map_w = w;
        for (int i = 5; i < 7; ++i) {
            h = conv_out(h, strides[i]);
            w = conv_out(w, strides[i]);
        }
        fc1.init(dw[6] * h * w, c.d_fc, rng, 2.0);
        fc2.init(c.d_fc, 1, rng, 1.0);
    }

    static int conv_out(int n, int stride) { return (n - 1) / stride + 1; }  // 3x3, pad 1

    struct Out {
        Idx logit;    // scalar, pre-sigmoid
        Idx map = -1; // single-channel map at (map_h, map_w); -1 in plain mode
    };

    Out apply(Graph<T>& g, Idx image) { return forward(g, image, false); }
    /// Same forward pass but weights enter the graph as constants, for use
    /// inside the generator's update.
    Out apply_frozen(Graph<T>& g, Idx image) { return forward(g, image, true); }

    template <typename F>
    void visit_params(F&& f, const std::string& prefix = "disc") {
        for (int i = 0; i < 7; ++i) convs[i].visit(prefix + ".c" + std::to_string(i + 1), f);
        if (attentive) {
            map1.visit(prefix + ".map1", f);
            map2.visit(prefix + ".map2", f);
        }
        fc1.visit(prefix + ".fc1", f);
        fc2.visit(prefix + ".fc2", f);
    }

  private:
    Out forward(Graph<T>& g, Idx image, bool frozen) {
        const Tensor<T>& img = g.val(image);
        require_channels(img, 3, "discriminator");
        if (img.h != cfg.in_h || img.w != cfg.in_w)
            throw shape_error("discriminator: model was built for " + std::to_string(cfg.in_h) + "x" +
                              std::to_string(cfg.in_w) + ", got " + std::to_string(img.h) + "x" +
                              std::to_string(img.w));
        auto cv = [&](Conv<T>& c, Idx x) { return frozen ? c.apply_frozen(g, x) : c.apply(g, x); };
        Idx h = image;
        for (int i = 0; i < 5; ++i) h = g.relu(cv(convs[i], h));
        Out out;
        if (attentive) {
            out.map = g.sigmoid(cv(map2, g.relu(cv(map1, h))));
            h = g.mul_bcast(h, out.map);
        }
        h = g.relu(cv(convs[5], h));
        h = g.relu(cv(convs[6], h));
        h = g.relu(frozen ? fc1.apply_frozen(g, h) : fc1.apply(g, h));
        out.logit = frozen ? fc2.apply_frozen(g, h) : fc2.apply(g, h);
        return out;
    }
};

/// L_map = MSE(Dmap(O), guide) + MSE(Dmap(R), 0). The guide (the generator's
/// final attention map, or the ground-truth mask) is given at full image
/// resolution and block-averaged down to the map branch's resolution.
template <typename T>
NodeIdx<T> map_loss_node(Graph<T>& g, NodeIdx<T> map_fake, NodeIdx<T> map_real, const Tensor<T>& guide) {
    const Tensor<T>& mf = g.val(map_fake);
    if (guide.h % mf.h != 0 || guide.w % mf.w != 0 || guide.h / mf.h != guide.w / mf.w)
        throw shape_error("map_loss: guide size is not an integer multiple of the map size");
    Tensor<T> target = guide.h == mf.h ? guide : area_downscale(guide, guide.h / mf.h);
    NodeIdx<T> fake_term = g.mse(map_fake, g.input(std::move(target)));
    NodeIdx<T> real_term = g.mse(map_real, g.input(Tensor<T>::zeros(mf.c, mf.h, mf.w)));
    return g.wsum({{fake_term, T(1)}, {real_term, T(1)}});
}

/// L_D = -log D(R) - log(1 - D(O)) + gamma * L_map, in stabilized logit form:
/// -log sigmoid(z) = softplus(-z) and -log(1 - sigmoid(z)) = softplus(z).
template <typename T>
NodeIdx<T> discriminator_loss_node(Graph<T>& g, NodeIdx<T> logit_real, NodeIdx<T> logit_fake,
                                   NodeIdx<T> map_term, T gamma) {
    NodeIdx<T> real = g.softplus(g.scale(logit_real, T(-1)));
    NodeIdx<T> fake = g.softplus(logit_fake);
    std::vector<std::pair<NodeIdx<T>, T>> terms = {{real, T(1)}, {fake, T(1)}};
    if (map_term >= 0) terms.emplace_back(map_term, gamma);
    return g.wsum(terms);
}

}  // namespace derain

#endif
