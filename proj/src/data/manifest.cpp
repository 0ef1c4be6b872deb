#include "lesiongen/data/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/image_io.hpp"

namespace lesiongen::data {

namespace fs = std::filesystem;

Source source_from_string(const std::string& s) {
    if (s == "real") return Source::real;
    if (s == "synthetic") return Source::synthetic;
    throw ValidationError("unknown source '" + s + "' (expected real|synthetic)");
}

std::string to_string(Source s) { return s == Source::real ? "real" : "synthetic"; }

void FourChannelSample::check_invariants() const {
    if (rgb.channels != 3) throw ValidationError("sample rgb must have 3 channels");
    if (rgb.height != mask.height || rgb.width != mask.width)
        throw ValidationError("sample rgb and mask sizes differ");
    for (uint8_t v : mask.px)
        if (v != 0 && v != 1) throw ValidationError("sample mask is not binary");
}

bool DatasetManifest::has_label(const std::string& category) const {
    return std::find(label_set.begin(), label_set.end(), category) != label_set.end();
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest is not valid JSON: " + path.string() + ": " + e.what());
    }

    DatasetManifest m;
    const std::string root_str = j.value("root", std::string("."));
    m.root = fs::path(root_str).is_absolute() ? fs::path(root_str)
                                              : path.parent_path() / root_str;
    m.label_set = j.at("label_set").get<std::vector<std::string>>();

    size_t idx = 0;
    for (const auto& rec : j.at("records")) {
        ManifestRecord r;
        r.image = rec.at("image").get<std::string>();
        r.mask = rec.at("mask").get<std::string>();
        r.caption = rec.value("caption", std::string{});
        r.category = rec.at("category").get<std::string>();
        r.source = source_from_string(rec.value("source", std::string("real")));
        if (!m.has_label(r.category))
            throw ValidationError("record " + std::to_string(idx) + " (" + r.image +
                                  "): category '" + r.category + "' not in label_set");
        if (!fs::exists(m.root / r.image))
            throw ValidationError("record " + std::to_string(idx) + ": missing image file " +
                                  (m.root / r.image).string());
        if (!fs::exists(m.root / r.mask))
            throw ValidationError("record " + std::to_string(idx) + ": missing mask file " +
                                  (m.root / r.mask).string());
        m.records.push_back(std::move(r));
        ++idx;
    }
    return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : m.records)
        records.push_back({{"image", r.image},
                           {"mask", r.mask},
                           {"caption", r.caption},
                           {"category", r.category},
                           {"source", to_string(r.source)}});
    // Paths are stored relative to the manifest location.
    nlohmann::json j{{"root", "."}, {"label_set", m.label_set}, {"records", records}};
    if (!m.root.empty()) {
        fs::path rel = fs::relative(m.root, path.parent_path().empty() ? fs::path(".")
                                                                       : path.parent_path());
        j["root"] = rel.string();
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

FourChannelSample load_sample(const DatasetManifest& m, const ManifestRecord& r) {
    FourChannelSample s;
    s.rgb = read_image(m.image_path(r));
    s.mask = read_mask_png(m.mask_path(r));
    s.caption = r.caption;
    s.category = r.category;
    s.source = r.source;
    s.check_invariants();
    return s;
}

std::map<std::string, size_t> class_histogram(const DatasetManifest& m) {
    std::map<std::string, size_t> h;
    for (const auto& label : m.label_set) h[label] = 0;
    for (const auto& r : m.records) ++h[r.category];
    return h;
}

}  // namespace lesiongen::data
