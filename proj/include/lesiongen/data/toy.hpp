#pragma once

#include "lesiongen/data/manifest.hpp"

namespace lesiongen::data {

// Procedural desk-scale dataset: bright soft-edged ellipses ("lesions") on a
// dark textured background, with the mask drawn at the intensity-falloff
// midpoint so an intensity threshold recovers it. Categories shape the
// ellipse geometry ("lesion" free-form, "round" circular, "elongated" 2:1).
struct ToyDatasetSpec {
    size_t count = 200;
    int image_size = 32;
    std::vector<std::string> categories = {"lesion"};
    uint64_t seed = 7;
};

FourChannelSample make_toy_sample(int image_size, const std::string& category, uint64_t seed);

// Writes PNG pairs plus manifest.json under dir and returns the loaded manifest.
DatasetManifest make_toy_dataset(const std::filesystem::path& dir, const ToyDatasetSpec& spec);

}  // namespace lesiongen::data
