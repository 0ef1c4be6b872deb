#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lesiongen {

// Flat binary container for named float32 arrays: a JSON index followed by
// raw little-endian data. Used by checkpoints and optimizer state.
struct NamedArray {
    std::vector<int> shape;
    std::vector<float> data;
};

using ArrayMap = std::map<std::string, NamedArray>;

void save_arrays(const std::filesystem::path& path, const ArrayMap& arrays);
ArrayMap load_arrays(const std::filesystem::path& path);

}  // namespace lesiongen
