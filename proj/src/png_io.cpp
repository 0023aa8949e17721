#include "derain/png_io.hpp"

#include <zlib.h>

#include <cstring>

namespace derain {
namespace {

constexpr unsigned char kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t read_u32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    put_u32(out, crc);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
}

}  // namespace

ImageBytes decode_png(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();
    if (n < 8 || std::memcmp(p, kSignature, 8) != 0) throw data_error("not a PNG file");

    ImageBytes img;
    int bit_depth = 0, color_type = 0;
    std::string idat;
    bool saw_ihdr = false, saw_iend = false;
    std::size_t pos = 8;
    while (pos + 12 <= n && !saw_iend) {
        std::uint32_t len = read_u32(p + pos);
        if (pos + 12 + len > n) throw data_error("PNG: truncated chunk");
        const char* type = bytes.data() + pos + 4;
        const unsigned char* data = p + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw data_error("PNG: bad IHDR");
            img.w = static_cast<int>(read_u32(data));
            img.h = static_cast<int>(read_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[10] != 0 || data[11] != 0) throw data_error("PNG: unsupported compression/filter method");
            if (data[12] != 0) throw data_error("PNG: interlaced images not supported");
            if (bit_depth != 8) throw data_error("PNG: only 8-bit depth supported");
            switch (color_type) {
                case 0: img.c = 1; break;
                case 2: img.c = 3; break;
                case 4: img.c = 2; break;
                case 6: img.c = 4; break;
                default: throw data_error("PNG: unsupported color type " + std::to_string(color_type));
            }
            if (img.w <= 0 || img.h <= 0) throw data_error("PNG: bad dimensions");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.append(bytes.data() + pos + 8, len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend) throw data_error("PNG: missing IHDR or IEND");

    const std::size_t stride = static_cast<std::size_t>(img.w) * img.c;
    const std::size_t raw_size = (stride + 1) * img.h;
    std::vector<unsigned char> raw(raw_size);
    uLongf dest_len = static_cast<uLongf>(raw_size);
    int rc = uncompress(raw.data(), &dest_len, reinterpret_cast<const Bytef*>(idat.data()),
                        static_cast<uLong>(idat.size()));
    if (rc != Z_OK || dest_len != raw_size) throw data_error("PNG: corrupt pixel data");

    img.pixels.assign(stride * img.h, 0);
    const int bpp = img.c;
    for (int y = 0; y < img.h; ++y) {
        const unsigned char* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        unsigned char* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        const unsigned char* prev = y > 0 ? row - stride : nullptr;
        const int filter = src[0];
        ++src;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<std::size_t>(bpp) ? row[x - bpp] : 0;
            int b = prev ? prev[x] : 0;
            int c = (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw data_error("PNG: unknown filter type " + std::to_string(filter));
            }
            row[x] = static_cast<unsigned char>(v & 0xff);
        }
    }
    return img;
}

std::string encode_png(const ImageBytes& img) {
    if (img.c != 1 && img.c != 3) throw data_error("PNG encode: only gray or RGB supported");
    if (img.w <= 0 || img.h <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.c) * img.h * img.w)
        throw data_error("PNG encode: inconsistent image dimensions");

    const std::size_t stride = static_cast<std::size_t>(img.w) * img.c;
    std::vector<unsigned char> raw((stride + 1) * img.h);
    for (int y = 0; y < img.h; ++y) {
        unsigned char* dst = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        dst[0] = 0;  // filter: none
        std::memcpy(dst + 1, img.pixels.data() + static_cast<std::size_t>(y) * stride, stride);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    int rc = compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                       Z_DEFAULT_COMPRESSION);
    if (rc != Z_OK) throw data_error("PNG encode: compression failed");

    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.w));
    put_u32(ihdr, static_cast<std::uint32_t>(img.h));
    ihdr.push_back(8);                           // bit depth
    ihdr.push_back(img.c == 1 ? 0 : 2);          // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::string out(reinterpret_cast<const char*>(kSignature), 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", std::string(reinterpret_cast<const char*>(compressed.data()), bound));
    put_chunk(out, "IEND", std::string());
    return out;
}

}  // namespace derain
