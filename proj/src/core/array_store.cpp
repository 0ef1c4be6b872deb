#include "lesiongen/core/array_store.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "lesiongen/core/error.hpp"

namespace lesiongen {

namespace {
constexpr char kMagic[8] = {'L', 'G', 'A', 'R', '0', '0', '0', '1'};
}

void save_arrays(const std::filesystem::path& path, const ArrayMap& arrays) {
    nlohmann::json index = nlohmann::json::object();
    uint64_t offset = 0;
    for (const auto& [name, arr] : arrays) {
        index[name] = {{"offset", offset}, {"count", arr.data.size()}, {"shape", arr.shape}};
        offset += arr.data.size() * sizeof(float);
    }
    const std::string header = index.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, arr] : arrays)
        out.write(reinterpret_cast<const char*>(arr.data.data()),
                  static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
    if (!out) throw IoError("short write to " + path.string());
}

ArrayMap load_arrays(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw IoError("not an array store: " + path.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json index = nlohmann::json::parse(header);
    const std::streampos data_start = in.tellg();
    ArrayMap out;
    for (auto& [name, meta] : index.items()) {
        NamedArray arr;
        arr.shape = meta.at("shape").get<std::vector<int>>();
        arr.data.resize(meta.at("count").get<size_t>());
        in.seekg(data_start + static_cast<std::streamoff>(meta.at("offset").get<uint64_t>()));
        in.read(reinterpret_cast<char*>(arr.data.data()),
                static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
        if (!in) throw IoError("truncated array store: " + path.string());
        out.emplace(name, std::move(arr));
    }
    return out;
}

}  // namespace lesiongen
