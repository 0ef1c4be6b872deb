#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "lesiongen/captions/client.hpp"

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "lesiongen/captions/prompts.hpp"
#include "lesiongen/core/error.hpp"

namespace lesiongen::captions {

namespace fs = std::filesystem;

void LlmClientConfig::validate() const {
    if (timeout_seconds <= 0) throw ArgumentError("llm client: timeout must be > 0");
    if (max_retries < 0) throw ArgumentError("llm client: retries must be >= 0");
    if (max_concurrency < 1) throw ArgumentError("llm client: concurrency must be >= 1");
}

std::string sha256_hex(const void* data, size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int dlen = 0;
    EVP_Digest(data, len, digest, &dlen, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(dlen * 2);
    for (unsigned int i = 0; i < dlen; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes.data(), bytes.size());
}

std::string cache_key(const CaptionRequest& req, const LlmClientConfig& cfg) {
    // Keyed by content digest, not path: dataset files move.
    std::string image_digest = fs::exists(req.image_ref)
                                   ? sha256_file_hex(req.image_ref)
                                   : sha256_hex(req.image_ref.data(), req.image_ref.size());
    const std::string material = image_digest + "|" + req.template_id + "|" + cfg.model;
    return sha256_hex(material.data(), material.size());
}

namespace {

std::string base64_encode(const std::string& bytes) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                           (static_cast<uint8_t>(bytes[i + 1]) << 8) |
                           static_cast<uint8_t>(bytes[i + 2]);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    if (i < bytes.size()) {
        uint32_t v = static_cast<uint8_t>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) v |= static_cast<uint8_t>(bytes[i + 1]) << 8;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(i + 1 < bytes.size() ? tbl[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

// Serializes writes per cache key; reads are lock-free once the file exists.
std::mutex g_key_mutex_guard;
std::map<std::string, std::unique_ptr<std::mutex>> g_key_mutexes;

std::mutex& key_mutex(const std::string& key) {
    std::lock_guard<std::mutex> lk(g_key_mutex_guard);
    auto& slot = g_key_mutexes[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

std::optional<std::string> read_cache(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_cache(const fs::path& file, const std::string& key, const std::string& text) {
    std::lock_guard<std::mutex> lk(key_mutex(key));
    fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
    }
    fs::rename(tmp, file);
}

std::string post_chat(const CaptionRequest& req, const LlmClientConfig& cfg) {
    nlohmann::json content;
    const std::string instruction = build_enrichment_prompt(req.category);
    if (cfg.send_image && fs::exists(req.image_ref)) {
        std::ifstream in(req.image_ref, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        content = nlohmann::json::array(
            {{{"type", "text"}, {"text", instruction}},
             {{"type", "image_url"},
              {"image_url", {{"url", "data:image/png;base64," + base64_encode(bytes)}}}}});
    } else {
        content = instruction;
    }
    nlohmann::json body{{"model", cfg.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};

    httplib::Client client(cfg.endpoint);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(cfg.timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int64_t>(cfg.timeout_seconds * 1000)));
    httplib::Headers headers;
    if (const char* token = std::getenv(cfg.auth_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
        auto res = client.Post(cfg.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            nlohmann::json reply = nlohmann::json::parse(res->body);
            return reply.at(nlohmann::json::json_pointer(cfg.response_pointer)).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
        }
    }
    throw ServiceError("caption service failed after " + std::to_string(cfg.max_retries + 1) +
                       " attempts (" + last_error + ")");
}

}  // namespace

std::string enrich_caption(const CaptionRequest& req, const LlmClientConfig& cfg) {
    cfg.validate();
    if (req.category.empty()) throw ArgumentError("enrich_caption: empty category");

    const std::string key = cache_key(req, cfg);
    const fs::path cache_file = cfg.cache_dir / (key + ".txt");
    if (auto cached = read_cache(cache_file)) return *cached;

    const std::string text = post_chat(req, cfg);
    if (!validate_caption(text, req.category))
        throw RejectedResponseError("caption for '" + req.category +
                                    "' does not start with the required prefix");
    write_cache(cache_file, key, text);
    return text;
}

std::string enrich_or_fallback(const CaptionRequest& req, const LlmClientConfig& cfg) {
    try {
        return enrich_caption(req, cfg);
    } catch (const ServiceError&) {
    } catch (const RejectedResponseError&) {
    }
    return build_generation_prompt(req.category);
}

std::vector<std::string> enrich_manifest(const data::DatasetManifest& manifest,
                                         const LlmClientConfig& cfg, bool fallback) {
    cfg.validate();
    std::vector<std::string> captions(manifest.records.size());
    std::vector<std::string> errors;
    std::mutex error_mutex;
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= manifest.records.size()) return;
            const auto& r = manifest.records[i];
            CaptionRequest req{r.category, manifest.image_path(r).string()};
            try {
                captions[i] = fallback ? enrich_or_fallback(req, cfg) : enrich_caption(req, cfg);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(error_mutex);
                errors.push_back(r.image + ": " + e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t n_threads =
        std::min<size_t>(static_cast<size_t>(cfg.max_concurrency), std::max<size_t>(manifest.records.size(), 1));
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!errors.empty())
        throw ServiceError("caption enrichment failed for " + std::to_string(errors.size()) +
                           " record(s); first: " + errors.front());
    return captions;
}

}  // namespace lesiongen::captions
