#ifndef DERAIN_METRICS_HPP
#define DERAIN_METRICS_HPP

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "derain/config.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Peak signal-to-noise ratio in dB, peak 1.0, MSE over all channels and
/// pixels. Identical images would be +inf; reported as a 99 dB cap.
template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y) {
    require_same_shape(x, y, "psnr");
    double mse = 0;
    for (Eigen::Index i = 0; i < x.v.size(); ++i) {
        const double d = static_cast<double>(x.v[i]) - static_cast<double>(y.v[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(x.v.size());
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, peak 1.0; valid windows only, per channel, averaged.
template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y) {
    require_same_shape(x, y, "ssim");
    constexpr int kWin = 11;
    if (x.h < kWin || x.w < kWin)
        throw shape_error("ssim: image must be at least 11x11, got " + x.shape_str());

    double win[kWin][kWin];
    double wsum = 0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - 5, dx = j - 5;
            win[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            wsum += win[i][j];
        }
    for (auto& row : win)
        for (double& v : row) v /= wsum;

    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    long count = 0;
    for (int ch = 0; ch < x.c; ++ch)
        for (int y0 = 0; y0 + kWin <= x.h; ++y0)
            for (int x0 = 0; x0 + kWin <= x.w; ++x0) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        const double a = x.at(ch, y0 + i, x0 + j);
                        const double b = y.at(ch, y0 + i, x0 + j);
                        const double w = win[i][j];
                        mx += w * a;
                        my += w * b;
                        xx += w * a * a;
                        yy += w * b * b;
                        xy += w * a * b;
                    }
                const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
                total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    return total / count;
}

/// IoU between the thresholded map (A >= threshold) and the binary mask.
/// Both sets empty counts as perfect agreement (IoU 1).
template <typename T>
double attention_iou(const Tensor<T>& map, const Tensor<T>& mask, double threshold = 0.5) {
    require_same_shape(map, mask, "attention_iou");
    long inter = 0, uni = 0;
    for (Eigen::Index i = 0; i < map.v.size(); ++i) {
        const bool p = static_cast<double>(map.v[i]) >= threshold;
        const bool m = mask.v[i] > T(0.5);
        inter += (p && m);
        uni += (p || m);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Per-time-step IoU of an attention rollout against the ground-truth mask.
template <typename T>
std::vector<double> attention_alignment(const std::vector<Tensor<T>>& maps, const Tensor<T>& mask,
                                        double threshold = 0.5) {
    std::vector<double> out;
    out.reserve(maps.size());
    for (const auto& m : maps) out.push_back(attention_iou(m, mask, threshold));
    return out;
}

/// Mean attention inside the mask minus mean attention outside it.
template <typename T>
double attention_contrast(const Tensor<T>& map, const Tensor<T>& mask) {
    require_same_shape(map, mask, "attention_contrast");
    double in_sum = 0, out_sum = 0;
    long in_n = 0, out_n = 0;
    for (Eigen::Index i = 0; i < map.v.size(); ++i) {
        if (mask.v[i] > T(0.5)) {
            in_sum += map.v[i];
            ++in_n;
        } else {
            out_sum += map.v[i];
            ++out_n;
        }
    }
    if (in_n == 0 || out_n == 0) return 0.0;
    return in_sum / in_n - out_sum / out_n;
}

struct EvalRow {
    std::string id;
    double psnr = 0, ssim = 0;
};

struct EvalReport {
    std::string variant;
    std::vector<EvalRow> rows;
    std::vector<double> mean_iou;  // per time step; empty when no attention rollout

    double mean_psnr() const {
        double s = 0;
        for (const auto& r : rows) s += r.psnr;
        return rows.empty() ? 0 : s / rows.size();
    }
    double mean_ssim() const {
        double s = 0;
        for (const auto& r : rows) s += r.ssim;
        return rows.empty() ? 0 : s / rows.size();
    }
};

inline std::string format_eval_csv(const EvalReport& r) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6);
    out << "id,psnr,ssim\n";
    for (const auto& row : r.rows) out << row.id << "," << row.psnr << "," << row.ssim << "\n";
    out << "mean," << r.mean_psnr() << "," << r.mean_ssim() << "\n";
    return out.str();
}

inline std::string format_eval_text(const EvalReport& r) {
    std::ostringstream out;
    out << "variant: " << r.variant << "\n";
    out << std::left << std::setw(10) << "id" << std::right << std::setw(10) << "psnr" << std::setw(10)
        << "ssim" << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& row : r.rows)
        out << std::left << std::setw(10) << row.id << std::right << std::setw(10) << row.psnr
            << std::setw(10) << row.ssim << "\n";
    out << std::left << std::setw(10) << "mean" << std::right << std::setw(10) << r.mean_psnr()
        << std::setw(10) << r.mean_ssim() << "\n";
    if (!r.mean_iou.empty()) {
        out << "attention IoU per step:";
        for (double v : r.mean_iou) out << " " << v;
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) rows.push_back({{"id", row.id}, {"psnr", row.psnr}, {"ssim", row.ssim}});
    nlohmann::json j{{"variant", r.variant},
                     {"rows", rows},
                     {"mean_psnr", r.mean_psnr()},
                     {"mean_ssim", r.mean_ssim()}};
    if (!r.mean_iou.empty()) j["mean_iou"] = r.mean_iou;
    return j;
}

/// Published full-scale results per variant, attached to ablation rows as
/// context. Desk-scale runs are not expected to reach these.
inline std::string variant_reference(Variant v) {
    switch (v) {
        case Variant::A: return "full-scale reference 29.25 dB / 0.7853";
        case Variant::AD: return "full-scale reference 30.88 dB / 0.8670";
        case Variant::AAD: return "full-scale reference 30.60 dB / 0.8710";
        case Variant::AAAD: return "full-scale reference 31.57 dB / 0.9023";
    }
    return "";
}

struct AblationRow {
    Variant variant = Variant::A;
    bool present = false;
    double psnr = 0, ssim = 0;
};

inline std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "variant,psnr,ssim,reference\n";
    out << std::fixed << std::setprecision(6);
    for (const auto& r : rows) {
        out << variant_name(r.variant) << ",";
        if (r.present)
            out << r.psnr << "," << r.ssim;
        else
            out << ",";
        out << ",\"" << variant_reference(r.variant) << "\"\n";
    }
    return out.str();
}

inline std::string format_ablation_text(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "variant" << std::right << std::setw(10) << "psnr"
        << std::setw(10) << "ssim" << "  reference\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& r : rows) {
        out << std::left << std::setw(8) << variant_name(r.variant);
        if (r.present)
            out << std::right << std::setw(10) << r.psnr << std::setw(10) << r.ssim;
        else
            out << std::right << std::setw(10) << "-" << std::setw(10) << "-";
        out << "  " << variant_reference(r.variant) << "\n";
    }
    return out.str();
}

inline nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"variant", variant_name(r.variant)},
                         {"present", r.present},
                         {"reference", variant_reference(r.variant)}};
        if (r.present) {
            j["psnr"] = r.psnr;
            j["ssim"] = r.ssim;
        }
        out.push_back(j);
    }
    return out;
}

}  // namespace derain

#endif
