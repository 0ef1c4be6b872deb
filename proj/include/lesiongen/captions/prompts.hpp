#pragma once

#include <string>

namespace lesiongen::captions {

// Instruction sent to the language model when enriching one image's caption.
std::string build_enrichment_prompt(const std::string& category);

// The fixed caption/diffusion prompt for a category; also the prefix every
// enriched caption must start with.
std::string build_generation_prompt(const std::string& category);

// True iff text starts (case-insensitively) with the generation prompt for
// the category and carries content beyond the prefix.
bool validate_caption(const std::string& text, const std::string& category);

}  // namespace lesiongen::captions
