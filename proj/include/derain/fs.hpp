#ifndef DERAIN_FS_HPP
#define DERAIN_FS_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include "derain/errors.hpp"

namespace derain {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw data_error("read failed on " + path);
    return bytes;
}

/// Write via a sibling temp file + rename, so readers never see partial files
/// and a failure leaves no file behind at the target path.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw data_error("write failed on " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw data_error("cannot move " + tmp.string() + " to " + path);
    }
}

}  // namespace derain

#endif
