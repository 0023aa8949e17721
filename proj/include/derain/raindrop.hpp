#ifndef DERAIN_RAINDROP_HPP
#define DERAIN_RAINDROP_HPP

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "derain/rng.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// One droplet on the virtual glass pane. The footprint is an axis-aligned
/// ellipse with horizontal semi-axis `radius` and vertical semi-axis
/// `radius * eccentricity`, clipped to the image.
struct RaindropSpec {
    double row = 0, col = 0;
    double radius = 1;
    double eccentricity = 1.0;  // in [0.5, 1.5]
    double blur_sigma = 0.0;
    double opacity = 1.0;  // in (0, 1]
};

/// I = (1 - M) . B + R, element-wise over channels with a single-channel
/// mask, clamped to [0,1]. Where M = 0 and R = 0 the output equals B exactly.
template <typename T>
Tensor<T> compose(const Tensor<T>& background, const Tensor<T>& mask, const Tensor<T>& rain) {
    require_same_shape(background, rain, "compose");
    require_spatial_match(background, mask, "compose");
    require_channels(mask, 1, "compose");
    Tensor<T> out(background.c, background.h, background.w);
    const Eigen::Index p = background.plane();
    for (int ch = 0; ch < background.c; ++ch)
        out.v.segment(ch * p, p) =
            (T(1) - mask.v) * background.v.segment(ch * p, p) + rain.v.segment(ch * p, p);
    out.v = out.v.cwiseMax(T(0)).cwiseMin(T(1));
    return out;
}

/// M(x) = 1 iff max over channels |degraded - clean| > threshold. The default
/// corresponds to 30 on the 0..255 scale.
template <typename T>
Tensor<T> extract_mask(const Tensor<T>& degraded, const Tensor<T>& clean, double threshold = 30.0 / 255.0) {
    require_same_shape(degraded, clean, "extract_mask");
    Tensor<T> out(1, degraded.h, degraded.w);
    const Eigen::Index p = degraded.plane();
    for (Eigen::Index i = 0; i < p; ++i) {
        double diff = 0;
        for (int ch = 0; ch < degraded.c; ++ch)
            diff = std::max(diff, std::abs(static_cast<double>(degraded.v[ch * p + i]) -
                                           static_cast<double>(clean.v[ch * p + i])));
        out.v[i] = diff > threshold ? T(1) : T(0);
    }
    return out;
}

/// Render droplets over a background. Returns (rain_layer, mask): the mask is
/// the union of the elliptical footprints; inside each droplet the layer is
/// an opacity blend of a vertically flipped, radially warped, blurred crop of
/// the background (the fish-eye refraction look) with a brightness lift; the
/// layer is zero outside the mask. A final pass pushes each covered pixel at
/// least 0.45*opacity away from the background in its most-changed channel,
/// so mask extraction at threshold 30/255 recovers every droplet pixel with
/// opacity >= 0.3 even after 8-bit quantization.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> render_rain_layer(const Tensor<T>& background,
                                                  const std::vector<RaindropSpec>& drops,
                                                  std::uint64_t seed) {
    const int h = background.h, w = background.w, c = background.c;
    Tensor<T> rain = Tensor<T>::zeros(c, h, w);
    Tensor<T> mask = Tensor<T>::zeros(1, h, w);
    Tensor<T> max_op = Tensor<T>::zeros(1, h, w);
    Pcg32 rng(seed, stream_tag("render"));

    for (const RaindropSpec& d : drops) {
        const double lift = 0.08 + 0.1 * rng.uniform();
        const double rx = d.radius;
        const double ry = d.radius * d.eccentricity;
        if (rx <= 0 || ry <= 0) continue;
        Tensor<T> blurred = gaussian_blur(background, d.blur_sigma);
        const int y0 = std::max(0, static_cast<int>(std::floor(d.row - ry)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(d.row + ry)));
        const int x0 = std::max(0, static_cast<int>(std::floor(d.col - rx)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(d.col + rx)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dy = y - d.row;
                const double dx = x - d.col;
                const double u2 = (dx / rx) * (dx / rx) + (dy / ry) * (dy / ry);
                if (u2 > 1.0) continue;
                const bool covered = mask.at(0, y, x) > T(0);
                mask.at(0, y, x) = T(1);
                max_op.at(0, y, x) = std::max(max_op.at(0, y, x), static_cast<T>(d.opacity));
                const double s = 0.35 + 0.45 * u2;  // strongest minification at the center
                const double sy = d.row - dy * s;   // vertical flip, as through a droplet lens
                const double sx = d.col + dx * s;
                for (int ch = 0; ch < c; ++ch) {
                    const double v = std::min(1.0, bilinear_sample(blurred, ch, sy, sx) + lift);
                    const double base = covered ? rain.at(ch, y, x) : background.at(ch, y, x);
                    rain.at(ch, y, x) = static_cast<T>(
                        std::min(1.0, std::max(0.0, d.opacity * v + (1.0 - d.opacity) * base)));
                }
            }
        }
    }

    // Divergence floor: guarantee the rendered droplet is detectable by
    // subtraction wherever it covers the image.
    const Eigen::Index p = background.plane();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (mask.v[i] == T(0)) continue;
        const double margin = 0.45 * static_cast<double>(max_op.v[i]);
        double diff = 0;
        for (int ch = 0; ch < c; ++ch)
            diff = std::max(diff, std::abs(static_cast<double>(rain.v[ch * p + i]) -
                                           static_cast<double>(background.v[ch * p + i])));
        if (diff >= margin) continue;
        for (int ch = 0; ch < c; ++ch) {
            const double b = background.v[ch * p + i];
            rain.v[ch * p + i] = static_cast<T>(b <= 0.5 ? b + margin : b - margin);
        }
    }
    return {std::move(rain), std::move(mask)};
}

/// Procedural background: a two-color gradient, a few filled ellipses and
/// rectangles, and low-amplitude pixel noise. Values land in [0,1].
template <typename T>
Tensor<T> procedural_background(int h, int w, Pcg32& rng) {
    Tensor<T> img(3, h, w);
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double gx = std::cos(angle), gy = std::sin(angle);
    double c0[3], c1[3];
    for (double& v : c0) v = rng.uniform(0.1, 0.9);
    for (double& v : c1) v = rng.uniform(0.1, 0.9);
    const double span = std::abs(gx) * (w - 1) + std::abs(gy) * (h - 1) + 1e-12;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double t = (gx * x + gy * y) / span;
            t = (t + 1.0) * 0.5;  // projection can be negative; fold into [0,1]
            t = std::min(std::max(t, 0.0), 1.0);
            for (int ch = 0; ch < 3; ++ch)
                img.at(ch, y, x) = static_cast<T>(c0[ch] + (c1[ch] - c0[ch]) * t);
        }

    const int n_shapes = rng.uniform_int(3, 6);
    for (int s = 0; s < n_shapes; ++s) {
        const bool ellipse = rng.uniform() < 0.5;
        double col[3];
        for (double& v : col) v = rng.uniform(0.05, 0.95);
        const double alpha = rng.uniform(0.6, 1.0);
        const double cyd = rng.uniform(0.0, h - 1.0), cxd = rng.uniform(0.0, w - 1.0);
        const double ryd = rng.uniform(h / 10.0, h / 3.0), rxd = rng.uniform(w / 10.0, w / 3.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool inside;
                if (ellipse) {
                    const double ddy = (y - cyd) / ryd, ddx = (x - cxd) / rxd;
                    inside = ddy * ddy + ddx * ddx <= 1.0;
                } else {
                    inside = std::abs(y - cyd) <= ryd && std::abs(x - cxd) <= rxd;
                }
                if (!inside) continue;
                for (int ch = 0; ch < 3; ++ch)
                    img.at(ch, y, x) = static_cast<T>(alpha * col[ch] + (1.0 - alpha) * img.at(ch, y, x));
            }
    }

    // Smooth value noise: a coarse per-channel offset grid upsampled
    // bilinearly, so the texture is band-limited like a defocused photo
    // rather than per-pixel static.
    const double amp = rng.uniform(0.01, 0.04);
    const int cell = 5;
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(3) * gh * gw);
    for (double& g : grid) g = rng.uniform(-amp, amp);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
                const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
                const double ty = fy - y0, tx = fx - x0;
                const double* g = grid.data() + static_cast<std::size_t>(ch) * gh * gw;
                const double top = g[y0 * gw + x0] * (1 - tx) + g[y0 * gw + x0 + 1] * tx;
                const double bot = g[(y0 + 1) * gw + x0] * (1 - tx) + g[(y0 + 1) * gw + x0 + 1] * tx;
                const double v = static_cast<double>(img.at(ch, y, x)) + top * (1 - ty) + bot * ty;
                img.at(ch, y, x) = static_cast<T>(std::min(1.0, std::max(0.0, v)));
            }
    return img;
}

template <typename T>
struct SyntheticPair {
    Tensor<T> degraded, clean, mask;
    std::uint64_t seed = 0;
    int drop_count = 0;
};

struct DropRange {
    int lo = 3, hi = 6;
};

/// Argument validation shared by the generator and the CLI, which must reject
/// bad requests before writing anything to disk.
inline void validate_dataset_args(int count, int h, int w, DropRange drops) {
    if (count < 1) throw usage_error("dataset count must be at least 1");
    if (drops.lo < 1 || drops.hi < drops.lo) throw usage_error("invalid droplet count range");
    if (h < 16 || w < 16 || h % 4 != 0 || w % 4 != 0)
        throw usage_error("image size must be at least 16x16 and divisible by 4");
}

/// Draw droplet geometry for one image. Shared by the dataset generator and
/// by re-renders of an existing scene with fresh droplets, so both sample
/// from the same distribution.
inline std::vector<RaindropSpec> sample_drop_specs(Pcg32& rng, int h, int w, int count) {
    std::vector<RaindropSpec> specs(count);
    const double rmax = std::min(h, w) / 7.0;
    const double rmin = std::min(h, w) / 12.0;
    for (RaindropSpec& d : specs) {
        d.radius = rng.uniform(rmin, rmax);
        d.eccentricity = rng.uniform(0.8, 1.3);
        const double ry = d.radius * d.eccentricity;
        d.row = rng.uniform(ry, h - 1 - ry);
        d.col = rng.uniform(d.radius, w - 1 - d.radius);
        d.blur_sigma = rng.uniform(0.5, 1.5);
        d.opacity = rng.uniform(0.5, 0.9);
    }
    return specs;
}

/// Deterministic synthetic dataset: procedural backgrounds with rendered
/// droplets. Per-pair seeds derive from the master seed, so any pair can be
/// regenerated in isolation.
template <typename T>
std::vector<SyntheticPair<T>> make_dataset(int count, int h, int w, DropRange drops, std::uint64_t seed) {
    validate_dataset_args(count, h, w, drops);

    std::vector<SyntheticPair<T>> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        SyntheticPair<T> pair;
        pair.seed = splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
        Pcg32 rng(pair.seed, stream_tag("pair"));
        pair.clean = procedural_background<T>(h, w, rng);
        pair.drop_count = rng.uniform_int(drops.lo, drops.hi);
        auto specs = sample_drop_specs(rng, h, w, pair.drop_count);
        auto [rain, mask] = render_rain_layer(pair.clean, specs, pair.seed);
        pair.mask = std::move(mask);
        pair.degraded = compose(pair.clean, pair.mask, rain);
        out.push_back(std::move(pair));
    }
    return out;
}

/// Re-render existing scenes with freshly placed droplets: the clean images
/// are reused while droplet geometry is drawn again under a salted seed.
/// Useful for judging restoration on droplets a model has never seen.
template <typename T>
std::vector<SyntheticPair<T>> rerender_with_fresh_drops(const std::vector<SyntheticPair<T>>& base,
                                                        DropRange drops, std::uint64_t salt) {
    std::vector<SyntheticPair<T>> out;
    out.reserve(base.size());
    for (const SyntheticPair<T>& b : base) {
        SyntheticPair<T> pair;
        pair.clean = b.clean;
        pair.seed = splitmix64(b.seed ^ salt);
        Pcg32 rng(pair.seed, stream_tag("pair"));
        const int h = static_cast<int>(pair.clean.h), w = static_cast<int>(pair.clean.w);
        pair.drop_count = rng.uniform_int(drops.lo, drops.hi);
        auto specs = sample_drop_specs(rng, h, w, pair.drop_count);
        auto [rain, mask] = render_rain_layer(pair.clean, specs, pair.seed);
        pair.mask = std::move(mask);
        pair.degraded = compose(pair.clean, pair.mask, rain);
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace derain

#endif
