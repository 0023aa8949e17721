#ifndef DERAIN_AUTOENCODER_HPP
#define DERAIN_AUTOENCODER_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "derain/config.hpp"
#include "derain/layers.hpp"

namespace derain {

/// Contextual autoencoder: 16 conv-relu blocks (8 encoder with two stride-2
/// reductions, 8 decoder with two upsamplings), skip connections from encoder
/// features into same-resolution decoder features, and 1x1 image heads on
/// decoder blocks 12/14/16 producing the 1/4, 1/2 and full-scale outputs.
template <typename T>
struct Autoencoder {
    using Idx = NodeIdx<T>;

    ModelConfig cfg;
    std::array<Conv<T>, 8> enc;
    std::array<Conv<T>, 8> dec;
    Conv<T> head_quarter, head_half, head_full;

    void init(const ModelConfig& c, Pcg32& rng) {
        cfg = c;
        const int w0 = c.ae_widths[0], w1 = c.ae_widths[1], w2 = c.ae_widths[2];
        const bool cat = c.skip_mode == SkipMode::concat;
        enc[0].init(4, w0, 3, 1, rng, 2.0);
        enc[1].init(w0, w0, 3, 1, rng, 2.0);
        enc[2].init(w0, w1, 3, 2, rng, 2.0);
        enc[3].init(w1, w1, 3, 1, rng, 2.0);
        enc[4].init(w1, w1, 3, 1, rng, 2.0);
        enc[5].init(w1, w2, 3, 2, rng, 2.0);
        enc[6].init(w2, w2, 3, 1, rng, 2.0);
        enc[7].init(w2, w2, 3, 1, rng, 2.0);
        dec[0].init(w2, w2, 3, 1, rng, 2.0);
        dec[1].init(w2, w2, 3, 1, rng, 2.0);
        dec[2].init(w2, w2, 3, 1, rng, 2.0);
        dec[3].init(w2, w2, 3, 1, rng, 2.0);
        dec[4].init(cat ? w2 + w1 : w2, w1, 3, 1, rng, 2.0);  // after first upsample, skip from enc[4]
        dec[5].init(w1, w1, 3, 1, rng, 2.0);
        dec[6].init(cat ? w1 + w0 : w1, w0, 3, 1, rng, 2.0);  // after second upsample, skip from enc[1]
        dec[7].init(w0, w0, 3, 1, rng, 2.0);
        head_quarter.init(w2, 3, 1, 1, rng, 1.0);
        head_half.init(w1, 3, 1, 1, rng, 1.0);
        head_full.init(w0, 3, 1, 1, rng, 1.0);
        // image heads start at mid-gray
        head_quarter.b.v.setConstant(T(0.5));
        head_half.b.v.setConstant(T(0.5));
        head_full.b.v.setConstant(T(0.5));
    }

    struct Outputs {
        Idx full, half, quarter;  // raw head outputs (loss targets)
        Idx image;                // full-scale output clamped to [0,1]
    };

    /// x is [image (+) attention map] (4 channels, size divisible by 4).
    Outputs generate(Graph<T>& g, Idx x) {
        const Tensor<T>& xv = g.val(x);
        require_channels(xv, 4, "autoencoder");
        ModelConfig::validate_size(xv.h, xv.w);
        const bool cat = cfg.skip_mode == SkipMode::concat;

        Idx e1 = g.relu(enc[0].apply(g, x));
        Idx e2 = g.relu(enc[1].apply(g, e1));
        Idx e3 = g.relu(enc[2].apply(g, e2));
        Idx e4 = g.relu(enc[3].apply(g, e3));
        Idx e5 = g.relu(enc[4].apply(g, e4));
        Idx e6 = g.relu(enc[5].apply(g, e5));
        Idx e7 = g.relu(enc[6].apply(g, e6));
        Idx e8 = g.relu(enc[7].apply(g, e7));

        Idx d = g.relu(dec[0].apply(g, e8));
        d = g.relu(dec[1].apply(g, d));
        d = g.relu(dec[2].apply(g, d));
        d = g.relu(dec[3].apply(g, d));
        Idx quarter = head_quarter.apply(g, d);

        Idx u1 = g.upsample_nearest2(d);
        Idx d5 = cat ? g.relu(dec[4].apply(g, g.concat_c(u1, e5)))
                     : g.relu(g.add(dec[4].apply(g, u1), e5));
        Idx d6 = g.relu(dec[5].apply(g, d5));
        Idx half = head_half.apply(g, d6);

        Idx u2 = g.upsample_nearest2(d6);
        Idx d7 = cat ? g.relu(dec[6].apply(g, g.concat_c(u2, e2)))
                     : g.relu(g.add(dec[6].apply(g, u2), e2));
        Idx d8 = g.relu(dec[7].apply(g, d7));
        Idx full = head_full.apply(g, d8);

        return {full, half, quarter, g.clamp01_pass(full)};
    }

    template <typename F>
    void visit_params(F&& f, const std::string& prefix = "ae") {
        for (int i = 0; i < 8; ++i) enc[i].visit(prefix + ".enc" + std::to_string(i + 1), f);
        for (int i = 0; i < 8; ++i) dec[i].visit(prefix + ".dec" + std::to_string(i + 9), f);
        head_quarter.visit(prefix + ".head_quarter", f);
        head_half.visit(prefix + ".head_half", f);
        head_full.visit(prefix + ".head_full", f);
    }
};

/// Fixed (never trained) convolutional feature extractor for the perceptual
/// loss. The conv_stack kind is a seeded 3-layer stand-in for a pretrained
/// backbone; identity reduces the loss to plain image MSE. percep_tap selects
/// which conv output is the feature map.
template <typename T>
struct PerceptualExtractor {
    PercepKind kind = PercepKind::conv_stack;
    int tap = 3;
    std::vector<Conv<T>> convs;

    void init(const ModelConfig& cfg) {
        kind = cfg.percep_kind;
        tap = cfg.percep_tap;
        convs.clear();
        if (kind == PercepKind::identity) return;
        if (tap < 1 || tap > 3) throw shape_error("perceptual extractor: tap must be in 1..3");
        Pcg32 rng(splitmix64(cfg.percep_seed ^ stream_tag("percep")));
        convs.resize(3);
        int in_c = 3;
        for (auto& cv : convs) {
            cv.init(in_c, cfg.percep_channels, 3, 1, rng, 2.0);
            in_c = cfg.percep_channels;
        }
    }

    /// Always applied with frozen weights; gradients flow through the input.
    NodeIdx<T> features(Graph<T>& g, NodeIdx<T> image) const {
        if (kind == PercepKind::identity) return image;
        NodeIdx<T> h = image;
        for (int i = 0; i < tap; ++i) h = g.relu(convs[i].apply_frozen(g, h));
        return h;
    }

    Tensor<T> features(const Tensor<T>& image) const {
        Graph<T> g;
        return g.val(features(g, g.input(image)));
    }
};

/// L_M = sum_i lambda_i * MSE(S_i, T_i); T_i is the ground truth downscaled by
/// area averaging. lambdas are ordered (quarter, half, full).
template <typename T>
NodeIdx<T> multiscale_loss_node(Graph<T>& g, NodeIdx<T> quarter, NodeIdx<T> half, NodeIdx<T> full,
                                const Tensor<T>& truth, const std::array<double, 3>& lambdas) {
    NodeIdx<T> t_full = g.input(truth);
    NodeIdx<T> t_half = g.input(area_downscale(truth, 2));
    NodeIdx<T> t_quarter = g.input(area_downscale(truth, 4));
    return g.wsum({{g.mse(quarter, t_quarter), static_cast<T>(lambdas[0])},
                   {g.mse(half, t_half), static_cast<T>(lambdas[1])},
                   {g.mse(full, t_full), static_cast<T>(lambdas[2])}});
}

/// Plain-tensor form; scales ordered (quarter, half, full) like the lambdas.
template <typename T>
T multiscale_loss(const std::array<Tensor<T>, 3>& scales, const Tensor<T>& truth,
                  const std::array<double, 3>& lambdas) {
    std::array<Tensor<T>, 3> targets = {area_downscale(truth, 4), area_downscale(truth, 2), truth};
    T total = 0;
    for (int i = 0; i < 3; ++i) {
        require_same_shape(scales[i], targets[i], "multiscale_loss");
        total += static_cast<T>(lambdas[i]) * (scales[i].v - targets[i].v).square().mean();
    }
    return total;
}

/// L_P = MSE(F(O), F(T)) under a fixed extractor.
template <typename T>
NodeIdx<T> perceptual_loss_node(Graph<T>& g, const PerceptualExtractor<T>& ex, NodeIdx<T> output,
                                const Tensor<T>& truth) {
    return g.mse(ex.features(g, output), g.input(ex.features(truth)));
}

template <typename T>
T perceptual_loss(const PerceptualExtractor<T>& ex, const Tensor<T>& output, const Tensor<T>& truth) {
    require_same_shape(output, truth, "perceptual_loss");
    Tensor<T> fo = ex.features(output), ft = ex.features(truth);
    return (fo.v - ft.v).square().mean();
}

/// L_G = 1e-2 * L_GAN + L_ATT + L_M + L_P with L_GAN(O) = log(1 - D(O)).
/// The GAN term is expected in its stabilized form (-softplus of the logit).
template <typename T>
T generator_loss(T gan_term, T att_loss, T ms_loss, T perc_loss, T gan_weight = T(1e-2)) {
    if (!(std::isfinite(static_cast<double>(gan_term)) && std::isfinite(static_cast<double>(att_loss)) &&
          std::isfinite(static_cast<double>(ms_loss)) && std::isfinite(static_cast<double>(perc_loss))))
        throw numeric_error("generator_loss: non-finite term (gan=" + std::to_string(static_cast<double>(gan_term)) +
                            " att=" + std::to_string(static_cast<double>(att_loss)) +
                            " ms=" + std::to_string(static_cast<double>(ms_loss)) +
                            " perc=" + std::to_string(static_cast<double>(perc_loss)) + ")");
    return gan_weight * gan_term + att_loss + ms_loss + perc_loss;
}

/// log(1 - sigmoid(z)) = -softplus(z), the stabilized generator GAN term.
template <typename T>
NodeIdx<T> gan_log_one_minus_d(Graph<T>& g, NodeIdx<T> logit) {
    return g.scale(g.softplus(logit), T(-1));
}

}  // namespace derain

#endif
