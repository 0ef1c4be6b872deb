#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lesiongen/core/image.hpp"

namespace lesiongen::data {

enum class Source { real, synthetic };

Source source_from_string(const std::string& s);
std::string to_string(Source s);

// One training unit: aligned RGB image and binary mask, plus caption/category.
struct FourChannelSample {
    ImageF rgb;  // [3,H,W] in [0,1]
    Mask mask;   // same H,W, values {0,1}
    std::string caption;
    std::string category;
    Source source = Source::real;

    void check_invariants() const;
};

struct ManifestRecord {
    std::string image;  // path relative to root
    std::string mask;
    std::string caption;
    std::string category;
    Source source = Source::real;
};

// Immutable after load; safe to share across threads.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> label_set;
    std::vector<ManifestRecord> records;

    bool has_label(const std::string& category) const;
    std::filesystem::path image_path(const ManifestRecord& r) const { return root / r.image; }
    std::filesystem::path mask_path(const ManifestRecord& r) const { return root / r.mask; }
};

// JSON manifest: {root, label_set[], records[{image, mask, caption, category, source}]}.
// All record invariants (files exist, categories known) are checked at load.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

// Decodes one record from disk (PNG/JPEG image, {0,255} PNG mask).
FourChannelSample load_sample(const DatasetManifest& m, const ManifestRecord& r);

std::map<std::string, size_t> class_histogram(const DatasetManifest& m);

}  // namespace lesiongen::data
