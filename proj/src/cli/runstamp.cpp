#include "lesiongen/cli/runstamp.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "lesiongen/captions/client.hpp"
#include "lesiongen/core/error.hpp"

namespace lesiongen::cli {

namespace {
constexpr const char* kVersion = "0.1.0";
}

void RunStamp::add_input(const std::filesystem::path& file) {
    input_digests[file.string()] = captions::sha256_file_hex(file);
}

nlohmann::json RunStamp::to_json() const {
    return {{"command", command},
            {"config", resolved_config},
            {"seed", seed},
            {"version", version},
            {"timestamp_utc", timestamp_utc},
            {"input_digests", input_digests}};
}

void RunStamp::write(const std::filesystem::path& out_dir) const {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "runstamp.json");
    if (!out) throw IoError("cannot write runstamp in " + out_dir.string());
    out << to_json().dump(2) << "\n";
}

RunStamp make_runstamp(const std::string& command, const nlohmann::json& resolved_config,
                       uint64_t seed) {
    RunStamp s;
    s.command = command;
    s.resolved_config = resolved_config;
    s.seed = seed;
    s.version = kVersion;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    s.timestamp_utc = buf;
    return s;
}

}  // namespace lesiongen::cli
