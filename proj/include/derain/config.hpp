#ifndef DERAIN_CONFIG_HPP
#define DERAIN_CONFIG_HPP

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "derain/errors.hpp"

namespace derain {

/// Ablation variants. A: autoencoder alone (uniform attention input);
/// A+D: plus plain discriminator; A+AD: plus attentive discriminator
/// (map branch supervised by the ground-truth mask); AA+AD: full model.
enum class Variant { A, AD, AAD, AAAD };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::A: return "A";
        case Variant::AD: return "A+D";
        case Variant::AAD: return "A+AD";
        case Variant::AAAD: return "AA+AD";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "A") return Variant::A;
    if (s == "A+D") return Variant::AD;
    if (s == "A+AD") return Variant::AAD;
    if (s == "AA+AD") return Variant::AAAD;
    throw usage_error("unknown variant '" + s + "' (expected A, A+D, A+AD, AA+AD)");
}

inline bool variant_has_discriminator(Variant v) { return v != Variant::A; }
inline bool variant_attentive_discriminator(Variant v) { return v == Variant::AAD || v == Variant::AAAD; }
inline bool variant_attentive_generator(Variant v) { return v == Variant::AAAD; }

enum class SkipMode { additive, concat };
enum class PercepKind { identity, conv_stack };

/// Network shape. Defaults are the desk-scale widths; tests shrink them to
/// keep finite-difference sweeps cheap. Spatial size is part of the model:
/// the LSTM peephole weights and the discriminator FC layer fix it.
struct ModelConfig {
    int in_h = 64, in_w = 64;

    // attentive-recurrent network
    int c_feat = 32;
    int c_lstm = 32;
    int att_mid = 16;
    int n_res = 5;
    int n_steps = 4;
    bool share_recurrent = true;

    // contextual autoencoder
    std::array<int, 3> ae_widths = {32, 64, 128};
    SkipMode skip_mode = SkipMode::additive;

    // discriminator
    std::array<int, 7> d_widths = {8, 16, 32, 64, 64, 64, 32};
    int d_fc = 1024;
    int d_map_mid = 32;

    // perceptual feature extractor (fixed, seeded; not trained)
    PercepKind percep_kind = PercepKind::conv_stack;
    int percep_channels = 8;
    int percep_tap = 3;  // 1..3: which conv output is the feature map
    std::uint64_t percep_seed = 77;

    /// Spatial sizes the networks accept: two stride-2 stages in both the
    /// autoencoder and the discriminator need divisibility by 4.
    static void validate_size(int h, int w) {
        if (h < 8 || w < 8 || h % 4 != 0 || w % 4 != 0)
            throw shape_error("image size " + std::to_string(h) + "x" + std::to_string(w) +
                              " not supported: height and width must be >= 8 and divisible by 4");
    }
};

/// Training hyperparameters. Loss weights default to the published values.
struct TrainConfig {
    Variant variant = Variant::AAAD;
    int steps = 1000;
    int batch_size = 2;
    double learning_rate = 2e-4;
    std::uint64_t seed = 1;
    int n = 4;           // recurrent time steps N
    double theta = 0.8;  // attention loss decay
    double gamma = 0.05; // map-loss weight in the discriminator loss
    std::array<double, 3> lambdas = {0.6, 0.8, 1.0};  // quarter, half, full scale
    double gan_weight = 1e-2;

    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Global-norm gradient clip applied per update to each network's stacked
    // gradient (0 disables). Guards the alternating optimization against the
    // occasional adversarial-loss spike that can saturate the attention head.
    double clip_norm = 0.0;
    // When positive, the learning rate holds at `learning_rate` for the first
    // half of the run and then decays linearly to `lr_final` by the last
    // step, taming late-run adversarial oscillation. 0 keeps it constant.
    double lr_final = 0.0;

    int eval_every = 50;       // PSNR/SSIM cadence in the loss log (0 = never)
    int checkpoint_every = 0;  // extra periodic checkpoints (0 = final only)

    ModelConfig model;
};

inline void validate(const TrainConfig& c) {
    ModelConfig::validate_size(c.model.in_h, c.model.in_w);
    if (c.steps < 0) throw usage_error("steps must be non-negative");
    if (c.batch_size < 1) throw usage_error("batch size must be at least 1");
    if (c.learning_rate <= 0) throw usage_error("learning rate must be positive");
    if (c.n < 1) throw usage_error("need at least one recurrent time step");
    if (c.n != c.model.n_steps)
        throw usage_error("recurrent step counts disagree (n=" + std::to_string(c.n) +
                          ", model n_steps=" + std::to_string(c.model.n_steps) + ")");
    if (c.theta <= 0 || c.theta > 1) throw usage_error("theta must be in (0,1]");
    if (c.clip_norm < 0) throw usage_error("clip_norm must be non-negative (0 disables)");
    if (c.lr_final < 0) throw usage_error("lr_final must be non-negative (0 keeps the rate constant)");
    if (c.model.c_feat < 1 || c.model.c_lstm < 1 || c.model.att_mid < 1 || c.model.n_res < 1)
        throw usage_error("network widths must be positive");
    for (int wch : c.model.ae_widths)
        if (wch < 1) throw usage_error("network widths must be positive");
    for (int wch : c.model.d_widths)
        if (wch < 1) throw usage_error("network widths must be positive");
    if (c.model.d_fc < 1 || c.model.d_map_mid < 1) throw usage_error("network widths must be positive");
}

inline void to_json(nlohmann::json& j, const ModelConfig& m) {
    j = nlohmann::json{{"in_h", m.in_h},
                       {"in_w", m.in_w},
                       {"c_feat", m.c_feat},
                       {"c_lstm", m.c_lstm},
                       {"att_mid", m.att_mid},
                       {"n_res", m.n_res},
                       {"n_steps", m.n_steps},
                       {"share_recurrent", m.share_recurrent},
                       {"ae_widths", m.ae_widths},
                       {"skip_mode", m.skip_mode == SkipMode::additive ? "additive" : "concat"},
                       {"d_widths", m.d_widths},
                       {"d_fc", m.d_fc},
                       {"d_map_mid", m.d_map_mid},
                       {"percep_kind", m.percep_kind == PercepKind::identity ? "identity" : "conv_stack"},
                       {"percep_channels", m.percep_channels},
                       {"percep_tap", m.percep_tap},
                       {"percep_seed", m.percep_seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& m) {
    j.at("in_h").get_to(m.in_h);
    j.at("in_w").get_to(m.in_w);
    j.at("c_feat").get_to(m.c_feat);
    j.at("c_lstm").get_to(m.c_lstm);
    j.at("att_mid").get_to(m.att_mid);
    j.at("n_res").get_to(m.n_res);
    j.at("n_steps").get_to(m.n_steps);
    j.at("share_recurrent").get_to(m.share_recurrent);
    j.at("ae_widths").get_to(m.ae_widths);
    m.skip_mode = j.at("skip_mode").get<std::string>() == "concat" ? SkipMode::concat : SkipMode::additive;
    j.at("d_widths").get_to(m.d_widths);
    j.at("d_fc").get_to(m.d_fc);
    j.at("d_map_mid").get_to(m.d_map_mid);
    m.percep_kind =
        j.at("percep_kind").get<std::string>() == "identity" ? PercepKind::identity : PercepKind::conv_stack;
    j.at("percep_channels").get_to(m.percep_channels);
    j.at("percep_tap").get_to(m.percep_tap);
    j.at("percep_seed").get_to(m.percep_seed);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"variant", variant_name(c.variant)},
                       {"steps", c.steps},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"seed", c.seed},
                       {"n", c.n},
                       {"theta", c.theta},
                       {"gamma", c.gamma},
                       {"lambdas", c.lambdas},
                       {"gan_weight", c.gan_weight},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"clip_norm", c.clip_norm},
                       {"lr_final", c.lr_final},
                       {"eval_every", c.eval_every},
                       {"checkpoint_every", c.checkpoint_every},
                       {"model", c.model}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    j.at("steps").get_to(c.steps);
    j.at("batch_size").get_to(c.batch_size);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("seed").get_to(c.seed);
    j.at("n").get_to(c.n);
    j.at("theta").get_to(c.theta);
    j.at("gamma").get_to(c.gamma);
    j.at("lambdas").get_to(c.lambdas);
    j.at("gan_weight").get_to(c.gan_weight);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("clip_norm").get_to(c.clip_norm);
    j.at("lr_final").get_to(c.lr_final);
    j.at("eval_every").get_to(c.eval_every);
    j.at("checkpoint_every").get_to(c.checkpoint_every);
    j.at("model").get_to(c.model);
}

}  // namespace derain

#endif
