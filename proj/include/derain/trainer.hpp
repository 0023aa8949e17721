#ifndef DERAIN_TRAINER_HPP
#define DERAIN_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "derain/attention_net.hpp"
#include "derain/autoencoder.hpp"
#include "derain/checkpoint.hpp"
#include "derain/dataset.hpp"
#include "derain/discriminator.hpp"
#include "derain/metrics.hpp"
#include "derain/optimizer.hpp"

namespace derain {

/// Holds the networks of one ablation variant and runs the alternating
/// adversarial optimization: per step, a generator update against the frozen
/// discriminator, then a discriminator update on the detached fakes.
template <typename T>
class Trainer {
  public:
    using Idx = NodeIdx<T>;

    explicit Trainer(const TrainConfig& c) : cfg(c) {
        build();
        Pcg32 master(cfg.seed);
        if (use_att_) {
            Pcg32 r = master.fork(stream_tag("init.att"));
            att_.init(cfg.model, r);
        }
        {
            Pcg32 r = master.fork(stream_tag("init.ae"));
            ae_.init(cfg.model, r);
        }
        if (use_disc_) {
            Pcg32 r = master.fork(stream_tag("init.disc"));
            disc_.init(cfg.model, att_disc_, r);
        }
        data_rng_ = master.fork(stream_tag("data"));
        collect();
    }

    explicit Trainer(const Checkpoint& ck) : cfg(ck.config) {
        build();
        Pcg32 dummy(0);
        if (use_att_) att_.init(cfg.model, dummy);
        ae_.init(cfg.model, dummy);
        if (use_disc_) disc_.init(cfg.model, att_disc_, dummy);
        collect();
        for (auto& p : gen_params_) load_param(ck, p);
        for (auto& p : disc_params_) load_param(ck, p);
        opt_g_.load(ck, gen_params_, "opt.g");
        if (use_disc_) opt_d_.load(ck, disc_params_, "opt.d");
        if (ck.rng_state.size() != 16) throw data_error("checkpoint: bad RNG state");
        data_rng_ = Pcg32::deserialize(ck.rng_state);
        step_ = static_cast<long>(ck.step);
    }

    // The parameter lists hold pointers into this object; it must stay put.
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    const TrainConfig& config() const { return cfg; }
    long step() const { return step_; }
    bool has_attention() const { return use_att_; }
    bool has_discriminator() const { return use_disc_; }
    /// Learning rate the next train_step will use under the decay schedule.
    double current_lr() const { return lr_at(step_); }

    struct StepStats {
        double l_att = 0, l_m = 0, l_p = 0, l_gan = 0, l_d = 0, l_map = 0;
        bool has_att = false, has_gan = false, has_map = false;
    };

    /// One optimization step over a batch sampled (with replacement) from the
    /// dataset. Throws numeric_error when any loss turns non-finite.
    StepStats train_step(const std::vector<DatasetPair<T>>& data) {
        if (data.empty()) throw data_error("training requires a non-empty dataset");
        StepStats stats;
        stats.has_att = use_att_;
        stats.has_gan = use_disc_;
        stats.has_map = att_disc_;

        const double lr_now = lr_at(step_);
        opt_g_.lr = lr_now;
        opt_d_.lr = lr_now;

        std::vector<int> batch(cfg.batch_size);
        for (int& b : batch) b = data_rng_.uniform_int(0, static_cast<int>(data.size()) - 1);

        std::vector<Tensor<T>> gacc = zero_like(gen_params_);
        std::vector<Tensor<T>> fakes, guides;
        fakes.reserve(batch.size());
        guides.reserve(batch.size());

        for (int bi : batch) {
            const DatasetPair<T>& pair = data[bi];
            Graph<T> g;
            Idx rain = g.input(pair.rain);
            GenForward f = generator_forward(g, rain);

            std::vector<std::pair<Idx, T>> terms;
            Idx l_att = -1;
            if (use_att_) {
                l_att = attention_loss_node(g, f.maps, g.input(pair.mask), static_cast<T>(cfg.theta));
                terms.emplace_back(l_att, T(1));
            }
            Idx l_m = multiscale_loss_node(g, f.quarter, f.half, f.full, pair.clean, cfg.lambdas);
            // Losses read the raw full-scale head output; clamping is for
            // inference only so gradients stay exact.
            Idx l_p = perceptual_loss_node(g, percep_, f.full, pair.clean);
            terms.emplace_back(l_m, T(1));
            terms.emplace_back(l_p, T(1));
            Idx l_gan = -1;
            if (use_disc_) {
                auto d = disc_.apply_frozen(g, f.full);
                l_gan = gan_log_one_minus_d(g, d.logit);
                terms.emplace_back(l_gan, static_cast<T>(cfg.gan_weight));
            }
            Idx total = g.wsum(terms);
            check_finite(g.scalar(total), "generator");
            g.backward(total);
            accumulate(g, gen_params_, gacc);

            if (use_att_) stats.l_att += g.scalar(l_att);
            stats.l_m += g.scalar(l_m);
            stats.l_p += g.scalar(l_p);
            if (use_disc_) {
                stats.l_gan += g.scalar(l_gan);
                fakes.push_back(g.val(f.full));
                guides.push_back(att_disc_ ? (use_att_ ? g.val(f.maps.back()) : data[bi].mask)
                                           : Tensor<T>());
            }
        }
        finish_batch(gacc, batch.size());
        clip_grad_norm(gacc, cfg.clip_norm);
        opt_g_.step(gen_params_, pointers(gacc));

        if (use_disc_) {
            std::vector<Tensor<T>> dacc = zero_like(disc_params_);
            for (std::size_t k = 0; k < batch.size(); ++k) {
                const DatasetPair<T>& pair = data[batch[k]];
                Graph<T> g;
                auto real = disc_.apply(g, g.input(pair.clean));
                auto fake = disc_.apply(g, g.input(fakes[k]));
                Idx map_term = -1;
                if (att_disc_) map_term = map_loss_node(g, fake.map, real.map, guides[k]);
                Idx l_d = discriminator_loss_node(g, real.logit, fake.logit, map_term,
                                                  static_cast<T>(cfg.gamma));
                check_finite(g.scalar(l_d), "discriminator");
                g.backward(l_d);
                accumulate(g, disc_params_, dacc);
                stats.l_d += g.scalar(l_d);
                if (att_disc_) stats.l_map += g.scalar(map_term);
            }
            finish_batch(dacc, batch.size());
            clip_grad_norm(dacc, cfg.clip_norm);
            opt_d_.step(disc_params_, pointers(dacc));
        }

        const double inv = 1.0 / static_cast<double>(batch.size());
        stats.l_att *= inv;
        stats.l_m *= inv;
        stats.l_p *= inv;
        stats.l_gan *= inv;
        stats.l_d *= inv;
        stats.l_map *= inv;
        ++step_;
        return stats;
    }

    struct InferResult {
        Tensor<T> output;
        std::vector<Tensor<T>> maps;  // A_1..A_N; empty without an attentive generator
    };

    InferResult infer(const Tensor<T>& image) {
        Graph<T> g;
        GenForward f = generator_forward(g, g.input(image));
        InferResult r;
        r.output = g.val(f.image);
        for (Idx m : f.maps) r.maps.push_back(g.val(m));
        return r;
    }

    EvalReport evaluate(const std::vector<DatasetPair<T>>& data) {
        EvalReport rep;
        rep.variant = variant_name(cfg.variant);
        std::vector<double> iou_sum;
        for (const auto& pair : data) {
            InferResult r = infer(pair.rain);
            rep.rows.push_back({pair.id, psnr(r.output, pair.clean), ssim(r.output, pair.clean)});
            if (!r.maps.empty()) {
                std::vector<double> iou = attention_alignment(r.maps, pair.mask);
                if (iou_sum.empty()) iou_sum.assign(iou.size(), 0.0);
                for (std::size_t t = 0; t < iou.size(); ++t) iou_sum[t] += iou[t];
            }
        }
        for (double v : iou_sum) rep.mean_iou.push_back(v / static_cast<double>(data.size()));
        return rep;
    }

    Checkpoint to_checkpoint() {
        Checkpoint ck;
        ck.step = static_cast<std::uint64_t>(step_);
        ck.config = cfg;
        ck.rng_state = data_rng_.serialize();
        for (const auto& p : gen_params_) ck.put(p.name, *p.tensor);
        for (const auto& p : disc_params_) ck.put(p.name, *p.tensor);
        opt_g_.save(ck, gen_params_, "opt.g");
        if (use_disc_) opt_d_.save(ck, disc_params_, "opt.d");
        return ck;
    }

    std::size_t generator_param_count() const { return count(gen_params_); }
    std::size_t discriminator_param_count() const { return count(disc_params_); }

  private:
    TrainConfig cfg;
    bool use_att_ = false, use_disc_ = false, att_disc_ = false;
    AttentionNet<T> att_;
    Autoencoder<T> ae_;
    Discriminator<T> disc_;
    PerceptualExtractor<T> percep_;
    ParamList<T> gen_params_, disc_params_;
    Adam<T> opt_g_, opt_d_;
    Pcg32 data_rng_;
    long step_ = 0;

    struct GenForward {
        std::vector<Idx> maps;
        Idx full, half, quarter, image;
    };

    void build() {
        validate(cfg);
        use_att_ = variant_attentive_generator(cfg.variant);
        use_disc_ = variant_has_discriminator(cfg.variant);
        att_disc_ = variant_attentive_discriminator(cfg.variant);
        percep_.init(cfg.model);
        for (Adam<T>* opt : {&opt_g_, &opt_d_}) {
            opt->lr = cfg.learning_rate;
            opt->beta1 = cfg.beta1;
            opt->beta2 = cfg.beta2;
            opt->eps = cfg.adam_eps;
        }
    }

    void collect() {
        gen_params_.clear();
        disc_params_.clear();
        if (use_att_) {
            auto a = collect_params<T>(att_, "att");
            gen_params_.insert(gen_params_.end(), a.begin(), a.end());
        }
        auto e = collect_params<T>(ae_, "ae");
        gen_params_.insert(gen_params_.end(), e.begin(), e.end());
        if (use_disc_) disc_params_ = collect_params<T>(disc_, "disc");
        opt_g_.init(gen_params_);
        if (use_disc_) opt_d_.init(disc_params_);
    }

    void load_param(const Checkpoint& ck, ParamRef<T>& p) {
        Tensor<T> t = ck.get<T>(p.name);
        require_same_shape(t, *p.tensor, "checkpoint load");
        *p.tensor = std::move(t);
    }

    GenForward generator_forward(Graph<T>& g, Idx rain) {
        const Tensor<T>& img = g.val(rain);
        require_channels(img, 3, "generator");
        if (img.h != cfg.model.in_h || img.w != cfg.model.in_w)
            throw shape_error("generator: model was built for " + std::to_string(cfg.model.in_h) + "x" +
                              std::to_string(cfg.model.in_w) + " inputs, got " + std::to_string(img.h) +
                              "x" + std::to_string(img.w) +
                              " (resize the input or train a matching model)");
        GenForward f;
        Idx att_in;
        if (use_att_) {
            auto roll = att_.rollout(g, rain, cfg.n);
            f.maps = roll.maps;
            att_in = f.maps.back();
        } else {
            att_in = g.input(Tensor<T>::full(1, img.h, img.w, T(0.5)));
        }
        auto out = ae_.generate(g, g.concat_c(rain, att_in));
        f.full = out.full;
        f.half = out.half;
        f.quarter = out.quarter;
        f.image = out.image;
        return f;
    }

    void check_finite(T value, const char* which) const {
        if (!std::isfinite(static_cast<double>(value)))
            throw numeric_error(std::string(which) + " loss became non-finite at step " +
                                std::to_string(step_ + 1));
    }

    static std::vector<Tensor<T>> zero_like(const ParamList<T>& params) {
        std::vector<Tensor<T>> out;
        out.reserve(params.size());
        for (const auto& p : params) out.push_back(Tensor<T>::zeros(p.tensor->c, p.tensor->h, p.tensor->w));
        return out;
    }

    static void accumulate(Graph<T>& g, const ParamList<T>& params, std::vector<Tensor<T>>& acc) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Tensor<T>* grad = g.grad_of(*params[i].tensor);
            if (grad) acc[i].v += grad->v;
        }
    }

    static void finish_batch(std::vector<Tensor<T>>& acc, std::size_t batch) {
        const T inv = T(1) / static_cast<T>(batch);
        for (auto& t : acc) t.v *= inv;
    }

    /// Learning rate for the step about to be taken: constant, or (when
    /// lr_final > 0) flat for the first half of the run then linear down to
    /// lr_final at the final step. Depends only on config + step, so resumed
    /// runs follow the same schedule.
    double lr_at(long step) const {
        if (cfg.lr_final <= 0 || cfg.steps <= 1) return cfg.learning_rate;
        const long hold = cfg.steps / 2;
        if (step <= hold) return cfg.learning_rate;
        const double frac = static_cast<double>(step - hold) / static_cast<double>(cfg.steps - 1 - hold);
        return cfg.learning_rate + (cfg.lr_final - cfg.learning_rate) * std::min(1.0, frac);
    }

    /// Rescale the stacked gradient to a global L2 norm of at most `clip`.
    static void clip_grad_norm(std::vector<Tensor<T>>& acc, double clip) {
        if (clip <= 0) return;
        double sq = 0;
        for (const auto& t : acc) sq += t.v.template cast<double>().matrix().squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > clip) {
            const T scale = static_cast<T>(clip / norm);
            for (auto& t : acc) t.v *= scale;
        }
    }

    static std::vector<const Tensor<T>*> pointers(const std::vector<Tensor<T>>& acc) {
        std::vector<const Tensor<T>*> out;
        out.reserve(acc.size());
        for (const auto& t : acc) out.push_back(&t);
        return out;
    }

    static std::size_t count(const ParamList<T>& params) {
        std::size_t n = 0;
        for (const auto& p : params) n += static_cast<std::size_t>(p.tensor->size());
        return n;
    }
};

/// CSV row with empty cells for loss terms a variant does not produce and for
/// skipped metric evaluations; formatting is fixed so reruns are byte-equal.
inline std::string format_log_row(long step, double l_att, double l_m, double l_p, double l_gan,
                                  double l_d, double l_map, bool has_att, bool has_gan, bool has_map,
                                  double psnr_val, double ssim_val, bool has_metrics) {
    char buf[256];
    auto cell = [](char* out, std::size_t cap, bool present, double v) {
        if (present)
            std::snprintf(out, cap, "%.6f", v);
        else
            out[0] = '\0';
    };
    char c_att[32], c_gan[32], c_d[32], c_map[32], c_psnr[32], c_ssim[32];
    cell(c_att, sizeof(c_att), has_att, l_att);
    cell(c_gan, sizeof(c_gan), has_gan, l_gan);
    cell(c_d, sizeof(c_d), has_gan, l_d);
    cell(c_map, sizeof(c_map), has_map, l_map);
    cell(c_psnr, sizeof(c_psnr), has_metrics, psnr_val);
    cell(c_ssim, sizeof(c_ssim), has_metrics, ssim_val);
    std::snprintf(buf, sizeof(buf), "%ld,%s,%.6f,%.6f,%s,%s,%s,%s,%s", step, c_att, l_m, l_p, c_gan, c_d,
                  c_map, c_psnr, c_ssim);
    return buf;
}

inline const char* log_header() { return "step,l_att,l_m,l_p,l_gan,l_d,l_map,psnr,ssim"; }

/// Drive training from the trainer's current step up to cfg.steps, appending
/// CSV rows to `log` and checkpointing per cfg.checkpoint_every (plus a final
/// checkpoint). On a numeric failure the last written checkpoint is named in
/// the error.
template <typename T>
void run_training(Trainer<T>& tr, const std::vector<DatasetPair<T>>& data, std::ostream& log,
                  const std::string& ckpt_path) {
    const TrainConfig& cfg = tr.config();
    std::string last_ckpt;
    auto save = [&]() {
        if (ckpt_path.empty()) return;
        tr.to_checkpoint().save(ckpt_path);
        last_ckpt = ckpt_path;
    };
    while (tr.step() < cfg.steps) {
        typename Trainer<T>::StepStats s;
        try {
            s = tr.train_step(data);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + "; last good checkpoint: " +
                                (last_ckpt.empty() ? "none written" : last_ckpt));
        }
        const long step = tr.step();
        double pv = 0, sv = 0;
        const bool eval_now = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        if (eval_now) {
            EvalReport rep = tr.evaluate(data);
            pv = rep.mean_psnr();
            sv = rep.mean_ssim();
        }
        log << format_log_row(step, s.l_att, s.l_m, s.l_p, s.l_gan, s.l_d, s.l_map, s.has_att, s.has_gan,
                              s.has_map, pv, sv, eval_now)
            << "\n";
        log.flush();
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) save();
    }
    save();
}

}  // namespace derain

#endif
