#include "lesiongen/captions/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "lesiongen/core/error.hpp"

namespace lesiongen::captions {

std::string build_enrichment_prompt(const std::string& category) {
    if (category.empty()) throw ArgumentError("build_enrichment_prompt: empty category");
    return "Analyze this " + category +
           " dermatology image. Describe in medical terms and give a sentence. Use ICD-11 "
           "terminology and begin with 'a dermoscopic lesion photo of " +
           category + " for skin cancer diagnosis,...'";
}

std::string build_generation_prompt(const std::string& category) {
    if (category.empty()) throw ArgumentError("build_generation_prompt: empty category");
    return "a dermoscopic lesion photo of " + category + " for skin cancer diagnosis";
}

bool validate_caption(const std::string& text, const std::string& category) {
    if (category.empty()) return false;
    const std::string prefix = build_generation_prompt(category);
    if (text.size() <= prefix.size()) return false;
    const auto ieq = [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
    };
    if (!std::equal(prefix.begin(), prefix.end(), text.begin(), ieq)) return false;
    // Something substantive must follow the prefix.
    return std::any_of(text.begin() + static_cast<long>(prefix.size()), text.end(), [](char c) {
        return !std::isspace(static_cast<unsigned char>(c)) && c != ',' && c != '.';
    });
}

}  // namespace lesiongen::captions
