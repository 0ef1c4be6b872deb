#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lesiongen/data/manifest.hpp"

namespace lesiongen::captions {

struct CaptionRequest {
    std::string category;
    std::string image_ref;  // path to the image (digested for the cache key)
    std::string template_id = "enrich-v1";
};

struct LlmClientConfig {
    std::string endpoint = "http://localhost:8080";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string auth_env = "LLM_API_TOKEN";  // token read from this env var only
    // JSON pointer locating the reply text in the response body.
    std::string response_pointer = "/choices/0/message/content";
    double timeout_seconds = 30.0;
    int max_retries = 2;
    std::filesystem::path cache_dir = ".caption-cache";
    bool send_image = true;  // attach the image as a data URL (vision mode)
    int max_concurrency = 4;

    void validate() const;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::filesystem::path& path);

// Cache key for a request: digest of (image digest, template id, model name).
std::string cache_key(const CaptionRequest& req, const LlmClientConfig& cfg);

// Returns a validated caption. A cache hit never touches the network; a fresh
// reply is validated, cached, then returned. Throws ServiceError after the
// configured retries and RejectedResponseError when the reply fails
// validate_caption (callers may fall back to build_generation_prompt).
std::string enrich_caption(const CaptionRequest& req, const LlmClientConfig& cfg);

// enrich_caption with the template fallback applied on service/validation
// failure. Never throws for remote-side problems.
std::string enrich_or_fallback(const CaptionRequest& req, const LlmClientConfig& cfg);

// Enriches every record with at most cfg.max_concurrency requests in flight;
// output order matches record order.
std::vector<std::string> enrich_manifest(const data::DatasetManifest& manifest,
                                         const LlmClientConfig& cfg, bool fallback);

}  // namespace lesiongen::captions
