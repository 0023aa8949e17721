#ifndef DERAIN_DATASET_HPP
#define DERAIN_DATASET_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "derain/png_io.hpp"
#include "derain/raindrop.hpp"

namespace derain {

/// One dataset example as stored on disk: rain/<id>.png (degraded RGB),
/// clean/<id>.png (ground truth RGB), mask/<id>.png (gray, 0 or 255).
template <typename T>
struct DatasetPair {
    std::string id;
    Tensor<T> rain, clean, mask;
};

inline std::string pair_id(int index) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04d", index);
    return buf;
}

/// Write pairs plus a manifest recording how to regenerate them. The manifest
/// is written last, so its presence marks a complete dataset.
template <typename T>
void save_dataset(const std::string& root, const std::string& split,
                  const std::vector<SyntheticPair<T>>& pairs, std::uint64_t seed, DropRange drops) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(root) / split;
    nlohmann::json manifest;
    manifest["split"] = split;
    manifest["seed"] = seed;
    manifest["drops"] = {{"lo", drops.lo}, {"hi", drops.hi}};
    if (!pairs.empty()) manifest["size"] = {pairs[0].clean.h, pairs[0].clean.w};
    manifest["pairs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string id = pair_id(static_cast<int>(i));
        save_image_png((base / "rain" / (id + ".png")).string(), pairs[i].degraded);
        save_image_png((base / "clean" / (id + ".png")).string(), pairs[i].clean);
        save_image_png((base / "mask" / (id + ".png")).string(), pairs[i].mask);
        manifest["pairs"].push_back({{"id", id}, {"seed", pairs[i].seed}, {"drops", pairs[i].drop_count}});
    }
    write_file_atomic((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

/// Load every triplet under <root>/<split>. Pairing is by filename stem; the
/// manifest is not required (user-supplied photo pairs work too), but when
/// present its id list fixes the order.
template <typename T>
std::vector<DatasetPair<T>> load_dataset(const std::string& root, const std::string& split) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(root) / split;
    if (!fs::is_directory(base / "rain")) throw data_error("no dataset at " + base.string());

    std::vector<std::string> ids;
    const fs::path manifest = base / "manifest.json";
    if (fs::exists(manifest)) {
        nlohmann::json j = nlohmann::json::parse(read_file(manifest.string()));
        for (const auto& e : j.at("pairs")) ids.push_back(e.at("id").get<std::string>());
    } else {
        for (const auto& entry : fs::directory_iterator(base / "rain"))
            if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
        std::sort(ids.begin(), ids.end());
    }
    if (ids.empty()) throw data_error("dataset at " + base.string() + " has no pairs");

    std::vector<DatasetPair<T>> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        DatasetPair<T> p;
        p.id = id;
        p.rain = load_image_png<T>((base / "rain" / (id + ".png")).string());
        p.clean = load_image_png<T>((base / "clean" / (id + ".png")).string());
        const fs::path mask_path = base / "mask" / (id + ".png");
        p.mask = fs::exists(mask_path) ? load_mask_png<T>(mask_path.string())
                                       : extract_mask(p.rain, p.clean);
        require_same_shape(p.rain, p.clean, "load_dataset");
        require_spatial_match(p.rain, p.mask, "load_dataset");
        // stored masks are 0 or 255; loading yields exactly 0 or 1
        for (Eigen::Index i = 0; i < p.mask.v.size(); ++i)
            p.mask.v[i] = p.mask.v[i] > T(0.5) ? T(1) : T(0);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace derain

#endif
