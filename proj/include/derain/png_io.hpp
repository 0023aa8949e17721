#ifndef DERAIN_PNG_IO_HPP
#define DERAIN_PNG_IO_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "derain/fs.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// 8-bit image with interleaved pixels (c = 1 gray, 2 gray+alpha, 3 RGB,
/// 4 RGBA), rows top to bottom.
struct ImageBytes {
    int c = 0, h = 0, w = 0;
    std::vector<std::uint8_t> pixels;
};

/// Decode an 8-bit non-interlaced PNG (gray / RGB, optional alpha).
ImageBytes decode_png(const std::string& bytes);

/// Encode gray (c=1) or RGB (c=3). Output bytes are deterministic.
std::string encode_png(const ImageBytes& img);

inline ImageBytes read_png(const std::string& path) {
    try {
        return decode_png(read_file(path));
    } catch (const data_error& e) {
        throw data_error(path + ": " + e.what());
    }
}

inline void write_png(const std::string& path, const ImageBytes& img) {
    write_file_atomic(path, encode_png(img));
}

/// [0,1] tensor with the requested channel count (1 or 3). Gray sources are
/// replicated up to RGB; alpha is dropped; RGB collapses to its first channel
/// when a single channel is requested.
template <typename T>
Tensor<T> tensor_from_bytes(const ImageBytes& img, int channels) {
    if (channels != 1 && channels != 3) throw shape_error("tensor_from_bytes: want 1 or 3 channels");
    Tensor<T> out(channels, img.h, img.w);
    const int color_c = img.c == 2 ? 1 : (img.c == 4 ? 3 : img.c);
    for (int ch = 0; ch < channels; ++ch) {
        const int src = std::min(ch, color_c - 1);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                out.at(ch, y, x) = static_cast<T>(img.pixels[(static_cast<std::size_t>(y) * img.w + x) * img.c + src]) /
                                   T(255);
    }
    return out;
}

template <typename T>
ImageBytes bytes_from_tensor(const Tensor<T>& t) {
    if (t.c != 1 && t.c != 3) throw shape_error("bytes_from_tensor: tensor must have 1 or 3 channels");
    ImageBytes img;
    img.c = t.c;
    img.h = t.h;
    img.w = t.w;
    img.pixels.resize(static_cast<std::size_t>(t.c) * t.h * t.w);
    for (int ch = 0; ch < t.c; ++ch)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                double v = std::min(std::max(static_cast<double>(t.at(ch, y, x)), 0.0), 1.0);
                img.pixels[(static_cast<std::size_t>(y) * t.w + x) * t.c + ch] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return img;
}

template <typename T>
Tensor<T> load_image_png(const std::string& path) {
    return tensor_from_bytes<T>(read_png(path), 3);
}

template <typename T>
Tensor<T> load_mask_png(const std::string& path) {
    return tensor_from_bytes<T>(read_png(path), 1);
}

template <typename T>
void save_image_png(const std::string& path, const Tensor<T>& img) {
    write_png(path, bytes_from_tensor(img));
}

}  // namespace derain

#endif
