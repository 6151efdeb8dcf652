#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "slqi/parallel.hpp"
#include "slqi/synthlabel.hpp"

namespace slqi {

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ordered dataset listing: a header line with version and config hash,
/// then one JSON object per image.
struct DatasetManifest {
    int version = 1;
    std::string config_hash;
    std::vector<Annotation> entries;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline nlohmann::json gen_config_to_json(const GenConfig& c) {
    nlohmann::json j;
    j["per_class_count"] = c.per_class_count;
    j["per_class_override"] = c.per_class_override;
    j["image_size_range"] = {c.min_w, c.min_h, c.max_w, c.max_h};
    j["master_seed"] = c.master_seed;
    j["font_scale"] = c.font_scale;
    j["margin"] = c.margin;
    nlohmann::json ranges = nlohmann::json::array();
    for (const IntensityRange& r : c.intensity) ranges.push_back({r.lo, r.hi});
    j["intensity"] = ranges;
    return j;
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
    GenConfig c;
    if (j.contains("per_class_count")) c.per_class_count = j["per_class_count"];
    if (j.contains("per_class_override"))
        for (int i = 0; i < kNumClasses; ++i)
            c.per_class_override[i] = j["per_class_override"].at(i);
    if (j.contains("image_size_range")) {
        const auto& r = j["image_size_range"];
        c.min_w = r.at(0);
        c.min_h = r.at(1);
        c.max_w = r.at(2);
        c.max_h = r.at(3);
    }
    if (j.contains("master_seed")) c.master_seed = j["master_seed"];
    if (j.contains("font_scale")) c.font_scale = j["font_scale"];
    if (j.contains("margin")) c.margin = j["margin"];
    if (j.contains("intensity"))
        for (int i = 0; i < kNumClasses; ++i) {
            c.intensity[i].lo = j["intensity"].at(i).at(0);
            c.intensity[i].hi = j["intensity"].at(i).at(1);
        }
    return c;
}

inline std::string gen_config_hash(const GenConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(gen_config_to_json(c).dump())));
    return buf;
}

inline nlohmann::json annotation_to_json(const Annotation& a) {
    nlohmann::json j;
    j["path"] = a.image_path;
    j["class"] = static_cast<int>(a.cls);
    j["barcode"] = {a.barcode_box.x, a.barcode_box.y, a.barcode_box.w,
                    a.barcode_box.h};
    j["address"] = {a.address_box.x, a.address_box.y, a.address_box.w,
                    a.address_box.h};
    j["seed"] = a.seed;
    return j;
}

inline Annotation annotation_from_json(const nlohmann::json& j) {
    Annotation a;
    a.image_path = j.at("path");
    a.cls = static_cast<QualityClass>(j.at("class").get<int>());
    a.barcode_box = {j.at("barcode").at(0), j.at("barcode").at(1),
                     j.at("barcode").at(2), j.at("barcode").at(3)};
    a.address_box = {j.at("address").at(0), j.at("address").at(1),
                     j.at("address").at(2), j.at("address").at(3)};
    a.seed = j.at("seed");
    return a;
}

inline void save_manifest(const DatasetManifest& m,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open manifest for writing: " + path.string());
    nlohmann::json header;
    header["version"] = m.version;
    header["config_hash"] = m.config_hash;
    out << header.dump() << "\n";
    for (const Annotation& a : m.entries) out << annotation_to_json(a).dump() << "\n";
    if (!out) throw IoFailure("manifest write failed: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open manifest: " + path.string());
    DatasetManifest m;
    std::string line;
    if (!std::getline(in, line)) throw IoFailure("empty manifest: " + path.string());
    const nlohmann::json header = nlohmann::json::parse(line);
    m.version = header.at("version");
    m.config_hash = header.value("config_hash", "");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        m.entries.push_back(annotation_from_json(nlohmann::json::parse(line)));
    }
    return m;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoFailure("cannot open: " + path.string());
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!in) throw IoFailure("read failed: " + path.string());
    return bytes;
}

/// Generate the full dataset under `out_dir`: PNM images plus a JSONL
/// manifest. Per-image seeds come from the splitmix64 stream of the master
/// seed indexed by global image order, so the tree is byte-reproducible.
inline DatasetManifest build_dataset(const GenConfig& config,
                                     const std::filesystem::path& out_dir) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoFailure("cannot create dataset directory: " + out_dir.string());

    struct Job {
        QualityClass cls;
        int index_in_class;
        std::uint64_t seed;
        std::string rel_path;
    };
    std::vector<Job> jobs;
    std::uint64_t global = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const int count = config.count_for(c);
        for (int i = 0; i < count; ++i, ++global) {
            char name[40];
            std::snprintf(name, sizeof name, "images/c%d_%04d.pnm", c, i);
            jobs.push_back({static_cast<QualityClass>(c), i,
                            splitmix64_at(config.master_seed, global), name});
        }
    }

    DatasetManifest manifest;
    manifest.config_hash = gen_config_hash(config);
    manifest.entries.resize(jobs.size());
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mu;
    parallel_for(jobs.size(), [&](std::size_t i) {
        if (failed.load()) return;
        try {
            const Job& job = jobs[i];
            auto [img, ann] = generate_label(job.seed, config, job.cls);
            ann.image_path = job.rel_path;
            write_file(out_dir / job.rel_path, write_pnm(img));
            manifest.entries[i] = std::move(ann);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failure_mu);
            failed = true;
            failure = e.what();
        }
    });
    if (failed) throw IoFailure("dataset generation failed: " + failure);

    save_manifest(manifest, out_dir / "manifest.jsonl");
    return manifest;
}

}  // namespace slqi
