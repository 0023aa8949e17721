#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "derain/dataset.hpp"
#include "derain/metrics.hpp"
#include "derain/trainer.hpp"

namespace fs = std::filesystem;
using Scalar = float;

namespace {

constexpr char kVersion[] = "1.0.0";

std::string timestamp_utc() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Every command drops a manifest with enough resolved state to replay the
/// run; written before the heavy work starts.
void write_run_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& config,
                        std::uint64_t seed, const std::string& data_root,
                        const std::vector<std::string>& outputs) {
    nlohmann::json j{{"command", command},        {"config", config},
                     {"seed", seed},              {"dataset_root", data_root},
                     {"outputs", outputs},        {"tool_version", kVersion},
                     {"timestamp", timestamp_utc()}};
    derain::write_file_atomic((dir / "run_manifest.json").string(), j.dump(2) + "\n");
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
    const char* env = std::getenv("DERAIN_SEED");
    if (!env || !*env) return fallback;
    try {
        return std::stoull(env);
    } catch (const std::exception&) {
        throw derain::usage_error(std::string("DERAIN_SEED is not an integer: ") + env);
    }
}

bool dir_non_empty(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_directory(p, ec)) return false;
    return fs::directory_iterator(p, ec) != fs::directory_iterator();
}

struct SynthArgs {
    std::string out, split = "train";
    int count = 8, size = 64;
    std::uint64_t seed = 1;
    bool seed_given = false;
    int drops_lo = 3, drops_hi = 6;
    bool force = false;
};

void cmd_synth(const SynthArgs& a) {
    const std::uint64_t seed = a.seed_given ? a.seed : env_seed_or(a.seed);
    // Reject bad arguments before anything touches the disk.
    derain::validate_dataset_args(a.count, a.size, a.size, {a.drops_lo, a.drops_hi});
    const fs::path base = fs::path(a.out) / a.split;
    if (!a.force && (dir_non_empty(base / "rain") || fs::exists(base / "manifest.json")))
        throw derain::data_error("refusing to overwrite non-empty dataset at " + base.string() +
                                 " (use --force)");
    nlohmann::json cfg{{"out", a.out},      {"split", a.split},        {"count", a.count},
                       {"size", a.size},    {"drops_lo", a.drops_lo},  {"drops_hi", a.drops_hi}};
    write_run_manifest(a.out, "synth", cfg, seed, a.out, {(base / "manifest.json").string()});
    auto pairs = derain::make_dataset<double>(a.count, a.size, a.size, {a.drops_lo, a.drops_hi}, seed);
    derain::save_dataset(a.out, a.split, pairs, seed, {a.drops_lo, a.drops_hi});
    std::cout << "wrote " << pairs.size() << " pairs to " << base.string() << "\n";
}

struct TrainArgs {
    std::string data, split = "train", out = "run";
    std::string resume, config_file;
    derain::TrainConfig tc;
    std::string variant = "AA+AD", skip_mode = "additive", percep_kind = "conv_stack";
    std::vector<int> ae_widths, d_widths;
    bool seed_given = false, steps_given = false, eval_given = false, ckpt_given = false;
    bool variant_given = false;
};

/// Apply a flat key=value config file to the training arguments. Precedence is
/// command line > config file > environment > built-in default, so a key is
/// skipped when its flag was given explicitly. Unknown keys are rejected to
/// catch typos.
void apply_train_config(const CLI::App& train, TrainArgs& a) {
    auto to_int = [](const std::string& k, const std::string& v) {
        try {
            std::size_t used = 0;
            const int r = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw derain::usage_error("config: bad integer for " + k + ": '" + v + "'");
        }
    };
    auto to_double = [](const std::string& k, const std::string& v) {
        try {
            std::size_t used = 0;
            const double r = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw derain::usage_error("config: bad number for " + k + ": '" + v + "'");
        }
    };
    auto to_u64 = [](const std::string& k, const std::string& v) -> std::uint64_t {
        try {
            std::size_t used = 0;
            const std::uint64_t r = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw derain::usage_error("config: bad integer for " + k + ": '" + v + "'");
        }
    };
    auto to_bool = [](const std::string& k, const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw derain::usage_error("config: bad boolean for " + k + ": '" + v + "'");
    };
    auto to_ints = [&](const std::string& k, const std::string& v) {
        std::vector<int> out;
        std::istringstream ss(v);
        for (std::string tok; ss >> tok;) out.push_back(to_int(k, tok));
        if (out.empty()) throw derain::usage_error("config: no values for " + k);
        return out;
    };
    auto member = [](const std::string& k, const std::string& v,
                     std::initializer_list<const char*> allowed) {
        for (const char* ok : allowed)
            if (v == ok) return v;
        throw derain::usage_error("config: bad value for " + k + ": '" + v + "'");
    };

    const std::map<std::string, std::function<void(const std::string&)>> keys = {
        {"split", [&](const std::string& v) { a.split = v; }},
        {"variant", [&](const std::string& v) { a.variant = v; a.variant_given = true; }},
        {"steps", [&](const std::string& v) { a.tc.steps = to_int("steps", v); a.steps_given = true; }},
        {"batch_size", [&](const std::string& v) { a.tc.batch_size = to_int("batch_size", v); }},
        {"learning_rate", [&](const std::string& v) { a.tc.learning_rate = to_double("learning_rate", v); }},
        {"seed", [&](const std::string& v) { a.tc.seed = to_u64("seed", v); a.seed_given = true; }},
        {"n", [&](const std::string& v) { a.tc.n = to_int("n", v); }},
        {"theta", [&](const std::string& v) { a.tc.theta = to_double("theta", v); }},
        {"gamma", [&](const std::string& v) { a.tc.gamma = to_double("gamma", v); }},
        {"gan_weight", [&](const std::string& v) { a.tc.gan_weight = to_double("gan_weight", v); }},
        {"beta1", [&](const std::string& v) { a.tc.beta1 = to_double("beta1", v); }},
        {"beta2", [&](const std::string& v) { a.tc.beta2 = to_double("beta2", v); }},
        {"adam_eps", [&](const std::string& v) { a.tc.adam_eps = to_double("adam_eps", v); }},
        {"clip_norm", [&](const std::string& v) { a.tc.clip_norm = to_double("clip_norm", v); }},
        {"lr_final", [&](const std::string& v) { a.tc.lr_final = to_double("lr_final", v); }},
        {"eval_every",
         [&](const std::string& v) { a.tc.eval_every = to_int("eval_every", v); a.eval_given = true; }},
        {"checkpoint_every",
         [&](const std::string& v) {
             a.tc.checkpoint_every = to_int("checkpoint_every", v);
             a.ckpt_given = true;
         }},
        {"c_feat", [&](const std::string& v) { a.tc.model.c_feat = to_int("c_feat", v); }},
        {"c_lstm", [&](const std::string& v) { a.tc.model.c_lstm = to_int("c_lstm", v); }},
        {"att_mid", [&](const std::string& v) { a.tc.model.att_mid = to_int("att_mid", v); }},
        {"n_res", [&](const std::string& v) { a.tc.model.n_res = to_int("n_res", v); }},
        {"share_recurrent",
         [&](const std::string& v) { a.tc.model.share_recurrent = to_bool("share_recurrent", v); }},
        {"ae_widths", [&](const std::string& v) { a.ae_widths = to_ints("ae_widths", v); }},
        {"skip_mode",
         [&](const std::string& v) { a.skip_mode = member("skip_mode", v, {"additive", "concat"}); }},
        {"d_widths", [&](const std::string& v) { a.d_widths = to_ints("d_widths", v); }},
        {"d_fc", [&](const std::string& v) { a.tc.model.d_fc = to_int("d_fc", v); }},
        {"d_map_mid", [&](const std::string& v) { a.tc.model.d_map_mid = to_int("d_map_mid", v); }},
        {"percep_kind",
         [&](const std::string& v) {
             a.percep_kind = member("percep_kind", v, {"identity", "conv_stack"});
         }},
        {"percep_channels",
         [&](const std::string& v) { a.tc.model.percep_channels = to_int("percep_channels", v); }},
        {"percep_tap", [&](const std::string& v) { a.tc.model.percep_tap = to_int("percep_tap", v); }},
        {"percep_seed", [&](const std::string& v) { a.tc.model.percep_seed = to_u64("percep_seed", v); }},
    };

    std::istringstream file(derain::read_file(a.config_file));
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(file, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw derain::usage_error("config: expected key=value at " + a.config_file + ":" +
                                      std::to_string(line_no));
        const std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        const auto it = keys.find(key);
        if (it == keys.end())
            throw derain::usage_error("config: unknown key '" + key + "' at " + a.config_file + ":" +
                                      std::to_string(line_no));
        if (train.count("--" + key) > 0) continue;  // explicit flag wins
        it->second(value);
    }
}

void cmd_train(TrainArgs& a) {
    auto data = derain::load_dataset<Scalar>(a.data, a.split);
    for (const auto& p : data)
        if (p.rain.h != data[0].rain.h || p.rain.w != data[0].rain.w)
            throw derain::data_error("dataset images disagree in size; train on a uniform split");

    std::unique_ptr<derain::Trainer<Scalar>> tr;
    if (!a.resume.empty()) {
        auto ck = derain::Checkpoint::load(a.resume);
        if (a.variant_given && derain::variant_from_name(a.variant) != ck.config.variant)
            throw derain::usage_error("--variant disagrees with the checkpoint (" +
                                      derain::variant_name(ck.config.variant) + ")");
        if (a.steps_given) ck.config.steps = a.tc.steps;
        if (a.eval_given) ck.config.eval_every = a.tc.eval_every;
        if (a.ckpt_given) ck.config.checkpoint_every = a.tc.checkpoint_every;
        tr = std::make_unique<derain::Trainer<Scalar>>(ck);
    } else {
        derain::TrainConfig tc = a.tc;
        tc.variant = derain::variant_from_name(a.variant);
        tc.seed = a.seed_given ? tc.seed : env_seed_or(tc.seed);
        tc.model.skip_mode =
            a.skip_mode == "concat" ? derain::SkipMode::concat : derain::SkipMode::additive;
        tc.model.percep_kind =
            a.percep_kind == "identity" ? derain::PercepKind::identity : derain::PercepKind::conv_stack;
        if (!a.ae_widths.empty()) {
            if (a.ae_widths.size() != 3) throw derain::usage_error("ae_widths needs 3 values");
            std::copy(a.ae_widths.begin(), a.ae_widths.end(), tc.model.ae_widths.begin());
        }
        if (!a.d_widths.empty()) {
            if (a.d_widths.size() != 7) throw derain::usage_error("d_widths needs 7 values");
            std::copy(a.d_widths.begin(), a.d_widths.end(), tc.model.d_widths.begin());
        }
        tc.model.n_steps = tc.n;
        tc.model.in_h = data[0].rain.h;
        tc.model.in_w = data[0].rain.w;
        tr = std::make_unique<derain::Trainer<Scalar>>(tc);
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    const std::string ckpt_path = (out / "checkpoint.ckpt").string();
    const std::string log_path = (out / "loss_log.csv").string();
    write_run_manifest(out, "train", nlohmann::json(tr->config()), tr->config().seed, a.data,
                       {ckpt_path, log_path});

    const bool fresh = a.resume.empty();
    std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw derain::data_error("cannot open " + log_path);
    if (fresh) log << derain::log_header() << "\n";
    derain::run_training(*tr, data, log, ckpt_path);
    std::cout << "trained to step " << tr->step() << "; checkpoint: " << ckpt_path << "\n";
}

struct InferArgs {
    std::string checkpoint, input, out;
    std::string steps_out;
};

void cmd_infer(const InferArgs& a) {
    auto ck = derain::Checkpoint::load(a.checkpoint);
    derain::Trainer<Scalar> tr(ck);
    auto image = derain::load_image_png<Scalar>(a.input);
    const fs::path out_dir = fs::path(a.out).has_parent_path() ? fs::path(a.out).parent_path() : ".";
    std::vector<std::string> outputs = {a.out};
    nlohmann::json cfg{{"checkpoint", a.checkpoint}, {"input", a.input}, {"steps_out", a.steps_out}};
    write_run_manifest(out_dir, "infer", cfg, ck.config.seed, "", outputs);

    auto r = tr.infer(image);
    derain::save_image_png(a.out, r.output);
    if (!a.steps_out.empty()) {
        if (r.maps.empty()) {
            std::cout << "variant " << derain::variant_name(ck.config.variant)
                      << " has no attention maps; nothing written to " << a.steps_out << "\n";
        } else {
            for (std::size_t t = 0; t < r.maps.size(); ++t)
                derain::save_image_png(
                    (fs::path(a.steps_out) / ("attention_" + std::to_string(t + 1) + ".png")).string(),
                    r.maps[t]);
        }
    }
    std::cout << "wrote " << a.out << "\n";
}

struct EvalArgs {
    std::string checkpoint, data, split = "test", out = "eval";
    bool json = false, sanity = false;
};

void cmd_eval(const EvalArgs& a) {
    auto data = derain::load_dataset<Scalar>(a.data, a.split);
    derain::EvalReport rep;
    const fs::path out(a.out);
    fs::create_directories(out);
    nlohmann::json cfg{{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                       {"sanity", a.sanity}};
    write_run_manifest(out, "eval", cfg, 0, a.data, {(out / "eval.csv").string()});

    if (a.sanity) {
        rep.variant = "sanity";
        for (const auto& p : data)
            rep.rows.push_back({p.id, derain::psnr(p.clean, p.clean), derain::ssim(p.clean, p.clean)});
    } else {
        if (a.checkpoint.empty()) throw derain::usage_error("--checkpoint is required (or use --sanity)");
        auto ck = derain::Checkpoint::load(a.checkpoint);
        derain::Trainer<Scalar> tr(ck);
        rep = tr.evaluate(data);
    }

    derain::write_file_atomic((out / "eval.csv").string(), derain::format_eval_csv(rep));
    derain::write_file_atomic((out / "eval.txt").string(), derain::format_eval_text(rep));
    if (a.json) {
        const std::string j = derain::eval_report_json(rep).dump(2) + "\n";
        derain::write_file_atomic((out / "eval.json").string(), j);
        std::cout << j;
    } else {
        std::cout << derain::format_eval_text(rep);
    }
}

struct AblateArgs {
    std::string data, split = "test", out = "ablation";
    std::vector<std::string> checkpoints;  // VARIANT=PATH
    bool json = false;
};

void cmd_ablate(const AblateArgs& a) {
    auto data = derain::load_dataset<Scalar>(a.data, a.split);
    const fs::path out(a.out);
    fs::create_directories(out);
    nlohmann::json cfg{{"data", a.data}, {"split", a.split}, {"checkpoints", a.checkpoints}};
    write_run_manifest(out, "ablate", cfg, 0, a.data, {(out / "ablation.csv").string()});

    std::vector<derain::AblationRow> rows;
    for (derain::Variant v : {derain::Variant::A, derain::Variant::AD, derain::Variant::AAD,
                              derain::Variant::AAAD})
        rows.push_back({v, false, 0, 0});

    for (const std::string& spec : a.checkpoints) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw derain::usage_error("expected VARIANT=PATH, got '" + spec + "'");
        const derain::Variant v = derain::variant_from_name(spec.substr(0, eq));
        auto ck = derain::Checkpoint::load(spec.substr(eq + 1));
        if (ck.config.variant != v)
            throw derain::data_error("checkpoint " + spec.substr(eq + 1) + " holds variant " +
                                     derain::variant_name(ck.config.variant) + ", not " +
                                     derain::variant_name(v));
        derain::Trainer<Scalar> tr(ck);
        derain::EvalReport rep = tr.evaluate(data);
        for (auto& row : rows)
            if (row.variant == v) {
                row.present = true;
                row.psnr = rep.mean_psnr();
                row.ssim = rep.mean_ssim();
            }
    }

    derain::write_file_atomic((out / "ablation.csv").string(), derain::format_ablation_csv(rows));
    derain::write_file_atomic((out / "ablation.txt").string(), derain::format_ablation_text(rows));
    if (a.json) {
        const std::string j = derain::ablation_json(rows).dump(2) + "\n";
        derain::write_file_atomic((out / "ablation.json").string(), j);
        std::cout << j;
    } else {
        std::cout << derain::format_ablation_text(rows);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attentive-GAN raindrop removal toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic raindrop dataset");
    synth->add_option("--out", sa.out, "dataset root directory")->required();
    synth->add_option("--split", sa.split, "split name (default train)");
    synth->add_option("--count", sa.count, "number of pairs");
    synth->add_option("--size", sa.size, "square image size");
    auto* synth_seed = synth->add_option("--seed", sa.seed, "master seed");
    synth->add_option("--drops-min", sa.drops_lo, "minimum droplets per image");
    synth->add_option("--drops-max", sa.drops_hi, "maximum droplets per image");
    synth->add_flag("--force", sa.force, "overwrite an existing dataset");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a model variant");
    train->add_option("--config", ta.config_file,
                      "flat key=value config file (explicit flags take precedence)");
    train->add_option("--data", ta.data, "dataset root")->required();
    train->add_option("--split", ta.split, "split name (default train)");
    train->add_option("--out", ta.out, "output directory (checkpoint + loss log)");
    train->add_option("--resume", ta.resume, "checkpoint to continue from");
    auto* var_opt = train->add_option("--variant", ta.variant, "A, A+D, A+AD, or AA+AD");
    auto* steps_opt = train->add_option("--steps", ta.tc.steps, "total training steps");
    train->add_option("--batch_size", ta.tc.batch_size, "batch size");
    train->add_option("--learning_rate", ta.tc.learning_rate, "Adam learning rate");
    auto* train_seed = train->add_option("--seed", ta.tc.seed, "master seed");
    train->add_option("--n", ta.tc.n, "recurrent time steps");
    train->add_option("--theta", ta.tc.theta, "attention loss decay");
    train->add_option("--gamma", ta.tc.gamma, "map loss weight");
    train->add_option("--gan_weight", ta.tc.gan_weight, "adversarial term weight");
    train->add_option("--beta1", ta.tc.beta1, "Adam beta1");
    train->add_option("--beta2", ta.tc.beta2, "Adam beta2");
    train->add_option("--adam_eps", ta.tc.adam_eps, "Adam epsilon");
    train->add_option("--clip_norm", ta.tc.clip_norm, "global gradient-norm clip (0 = off)");
    train->add_option("--lr_final", ta.tc.lr_final,
                      "decay the rate linearly to this over the second half (0 = constant)");
    auto* eval_opt = train->add_option("--eval_every", ta.tc.eval_every, "PSNR/SSIM cadence (0 = never)");
    auto* ckpt_opt =
        train->add_option("--checkpoint_every", ta.tc.checkpoint_every, "periodic checkpoint cadence");
    train->add_option("--c_feat", ta.tc.model.c_feat, "attention feature channels");
    train->add_option("--c_lstm", ta.tc.model.c_lstm, "LSTM channels");
    train->add_option("--att_mid", ta.tc.model.att_mid, "attention head hidden channels");
    train->add_option("--n_res", ta.tc.model.n_res, "residual blocks per step");
    train->add_option("--share_recurrent", ta.tc.model.share_recurrent, "share weights across steps");
    train->add_option("--ae_widths", ta.ae_widths, "autoencoder widths (3 values)");
    train->add_option("--skip_mode", ta.skip_mode, "additive or concat")
        ->check(CLI::IsMember({"additive", "concat"}));
    train->add_option("--d_widths", ta.d_widths, "discriminator widths (7 values)");
    train->add_option("--d_fc", ta.tc.model.d_fc, "discriminator FC width");
    train->add_option("--d_map_mid", ta.tc.model.d_map_mid, "discriminator map branch width");
    train->add_option("--percep_kind", ta.percep_kind, "identity or conv_stack")
        ->check(CLI::IsMember({"identity", "conv_stack"}));
    train->add_option("--percep_channels", ta.tc.model.percep_channels, "perceptual feature channels");
    train->add_option("--percep_tap", ta.tc.model.percep_tap, "perceptual tap depth (1-3)");
    train->add_option("--percep_seed", ta.tc.model.percep_seed, "perceptual extractor seed");

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "restore one image with a trained checkpoint");
    infer->add_option("--checkpoint", ia.checkpoint, "trained checkpoint")->required();
    infer->add_option("--input", ia.input, "degraded input PNG")->required();
    infer->add_option("--out", ia.out, "restored output PNG")->required();
    infer->add_option("--steps-out", ia.steps_out, "directory for per-step attention heatmaps");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", ea.checkpoint, "trained checkpoint");
    eval->add_option("--data", ea.data, "dataset root")->required();
    eval->add_option("--split", ea.split, "split name (default test)");
    eval->add_option("--out", ea.out, "report directory");
    eval->add_flag("--json", ea.json, "machine-readable output");
    eval->add_flag("--sanity", ea.sanity, "score ground truth against itself");

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "compare variants on a split");
    ablate->add_option("--data", aa.data, "dataset root")->required();
    ablate->add_option("--split", aa.split, "split name (default test)");
    ablate->add_option("--out", aa.out, "report directory");
    ablate->add_option("--checkpoint", aa.checkpoints, "VARIANT=PATH (repeatable)")->required();
    ablate->add_flag("--json", aa.json, "machine-readable output");

    try {
        app.parse(argc, argv);
        sa.seed_given = synth_seed->count() > 0;
        ta.seed_given = train_seed->count() > 0;
        ta.steps_given = steps_opt->count() > 0;
        ta.eval_given = eval_opt->count() > 0;
        ta.ckpt_given = ckpt_opt->count() > 0;
        ta.variant_given = var_opt->count() > 0;
        if (train->parsed() && !ta.config_file.empty()) apply_train_config(*train, ta);
        if (synth->parsed()) cmd_synth(sa);
        if (train->parsed()) cmd_train(ta);
        if (infer->parsed()) cmd_infer(ia);
        if (eval->parsed()) cmd_eval(ea);
        if (ablate->parsed()) cmd_ablate(aa);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const derain::usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const derain::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const derain::shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
