#ifndef DERAIN_CHECKPOINT_HPP
#define DERAIN_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "derain/config.hpp"
#include "derain/fs.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Single-file training snapshot: version, step counter, full config (JSON),
/// RNG state, and named parameter arrays (shape + dtype + raw little-endian
/// bytes). Covers model weights and optimizer moments alike.
class Checkpoint {
  public:
    static constexpr std::uint32_t kVersion = 1;
    static constexpr char kMagic[5] = "DRCP";

    std::uint64_t step = 0;
    TrainConfig config;
    std::vector<std::uint8_t> rng_state;

    struct Entry {
        std::string name;
        std::uint8_t dtype = 0;  // 1 = f32, 2 = f64
        int c = 0, h = 0, w = 0;
        std::vector<std::uint8_t> bytes;
    };

    const std::vector<Entry>& arrays() const { return arrays_; }
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    template <typename T>
    void put(const std::string& name, const Tensor<T>& t) {
        Entry e;
        e.name = name;
        e.dtype = sizeof(T) == 4 ? 1 : 2;
        e.c = t.c;
        e.h = t.h;
        e.w = t.w;
        e.bytes.resize(static_cast<std::size_t>(t.size()) * sizeof(T));
        std::memcpy(e.bytes.data(), t.v.data(), e.bytes.size());
        auto it = index_.find(name);
        if (it != index_.end()) {
            arrays_[it->second] = std::move(e);
        } else {
            index_[name] = arrays_.size();
            arrays_.push_back(std::move(e));
        }
    }

    template <typename T>
    Tensor<T> get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw data_error("checkpoint: missing array '" + name + "'");
        const Entry& e = arrays_[it->second];
        Tensor<T> t(e.c, e.h, e.w);
        if (e.dtype == (sizeof(T) == 4 ? 1 : 2)) {
            std::memcpy(t.v.data(), e.bytes.data(), e.bytes.size());
        } else if (e.dtype == 1) {
            const float* src = reinterpret_cast<const float*>(e.bytes.data());
            for (Eigen::Index i = 0; i < t.size(); ++i) t.v[i] = static_cast<T>(src[i]);
        } else {
            const double* src = reinterpret_cast<const double*>(e.bytes.data());
            for (Eigen::Index i = 0; i < t.size(); ++i) t.v[i] = static_cast<T>(src[i]);
        }
        return t;
    }

    std::string serialize() const {
        std::string out;
        out.append(kMagic, 4);
        put_u32(out, kVersion);
        put_u64(out, step);
        nlohmann::json cfg = config;
        put_blob(out, cfg.dump());
        put_blob(out, std::string(rng_state.begin(), rng_state.end()));
        put_u32(out, static_cast<std::uint32_t>(arrays_.size()));
        for (const Entry& e : arrays_) {
            put_blob(out, e.name);
            out.push_back(static_cast<char>(e.dtype));
            put_u32(out, static_cast<std::uint32_t>(e.c));
            put_u32(out, static_cast<std::uint32_t>(e.h));
            put_u32(out, static_cast<std::uint32_t>(e.w));
            put_u64(out, e.bytes.size());
            out.append(reinterpret_cast<const char*>(e.bytes.data()), e.bytes.size());
        }
        return out;
    }

    static Checkpoint deserialize(const std::string& bytes) {
        Reader r{bytes, 0};
        if (bytes.size() < 8 || bytes.compare(0, 4, kMagic, 4) != 0)
            throw data_error("checkpoint: bad magic (not a checkpoint file)");
        r.pos = 4;
        const std::uint32_t version = r.u32();
        if (version != kVersion)
            throw data_error("checkpoint: unsupported version " + std::to_string(version));
        Checkpoint ck;
        ck.step = r.u64();
        try {
            ck.config = nlohmann::json::parse(r.blob()).get<TrainConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("checkpoint: bad config block: ") + e.what());
        }
        std::string rng = r.blob();
        ck.rng_state.assign(rng.begin(), rng.end());
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            Entry e;
            e.name = r.blob();
            e.dtype = static_cast<std::uint8_t>(r.byte());
            if (e.dtype != 1 && e.dtype != 2) throw data_error("checkpoint: bad dtype in '" + e.name + "'");
            e.c = static_cast<int>(r.u32());
            e.h = static_cast<int>(r.u32());
            e.w = static_cast<int>(r.u32());
            const std::uint64_t len = r.u64();
            const std::uint64_t want =
                static_cast<std::uint64_t>(e.c) * e.h * e.w * (e.dtype == 1 ? 4 : 8);
            if (len != want) throw data_error("checkpoint: size mismatch in '" + e.name + "'");
            e.bytes.resize(len);
            r.raw(e.bytes.data(), len);
            ck.index_[e.name] = ck.arrays_.size();
            ck.arrays_.push_back(std::move(e));
        }
        return ck;
    }

    void save(const std::string& path) const { write_file_atomic(path, serialize()); }

    static Checkpoint load(const std::string& path) {
        try {
            return deserialize(read_file(path));
        } catch (const data_error& e) {
            throw data_error(path + ": " + e.what());
        }
    }

  private:
    std::vector<Entry> arrays_;
    std::unordered_map<std::string, std::size_t> index_;

    static void put_u32(std::string& out, std::uint32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        out.append(b, 4);
    }
    static void put_u64(std::string& out, std::uint64_t v) {
        char b[8];
        std::memcpy(b, &v, 8);
        out.append(b, 8);
    }
    static void put_blob(std::string& out, const std::string& s) {
        put_u64(out, s.size());
        out += s;
    }

    struct Reader {
        const std::string& bytes;
        std::size_t pos;

        void need(std::size_t n) const {
            if (pos + n > bytes.size()) throw data_error("checkpoint: truncated file");
        }
        char byte() {
            need(1);
            return bytes[pos++];
        }
        std::uint32_t u32() {
            need(4);
            std::uint32_t v;
            std::memcpy(&v, bytes.data() + pos, 4);
            pos += 4;
            return v;
        }
        std::uint64_t u64() {
            need(8);
            std::uint64_t v;
            std::memcpy(&v, bytes.data() + pos, 8);
            pos += 8;
            return v;
        }
        std::string blob() {
            const std::uint64_t n = u64();
            need(n);
            std::string s = bytes.substr(pos, n);
            pos += n;
            return s;
        }
        void raw(std::uint8_t* dst, std::size_t n) {
            need(n);
            std::memcpy(dst, bytes.data() + pos, n);
            pos += n;
        }
    };
};

}  // namespace derain

#endif
