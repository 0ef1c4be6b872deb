#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lesiongen::cli {

// Reproducibility record written with every artifact-producing command: the
// resolved configuration, seeds, code version, and digests of the input
// manifests are enough to re-run the command bit-identically (given the same
// weights).
struct RunStamp {
    std::string command;
    nlohmann::json resolved_config = nlohmann::json::object();
    uint64_t seed = 0;
    std::string version;
    std::string timestamp_utc;
    nlohmann::json input_digests = nlohmann::json::object();  // path -> sha256

    void add_input(const std::filesystem::path& file);
    nlohmann::json to_json() const;
    void write(const std::filesystem::path& out_dir) const;  // out_dir/runstamp.json
};

RunStamp make_runstamp(const std::string& command, const nlohmann::json& resolved_config,
                       uint64_t seed);

}  // namespace lesiongen::cli
