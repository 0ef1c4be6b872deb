#pragma once

#include <filesystem>

#include <json.hpp>

#include "lesiongen/backbone/lora.hpp"
#include "lesiongen/backbone/tiny.hpp"
#include "lesiongen/diffusion/schedule.hpp"

namespace lesiongen::backbone {

// Checkpoint directory layout:
//   meta.json     rank/alpha, surgery policies, schedule, backbone config
//   base.bin      frozen base parameters (owned only for the tiny backbone)
//   slices.bin    inflated channel slices (when surgery was applied)
//   adapters.bin  LoRA pairs (when injected)
// Adapters and slices never overwrite base arrays; they are separate files.
struct CheckpointContents {
    std::shared_ptr<TinyBackbone> bundle;
    LoraAdapterSet adapters;  // entries empty when no adapters are present
    diffusion::ScheduleConfig schedule;
    nlohmann::json meta;
};

void save_checkpoint(const std::filesystem::path& dir, TinyBackbone& bundle,
                     const LoraAdapterSet* adapters, const diffusion::ScheduleConfig& schedule,
                     const nlohmann::json& extra = nlohmann::json::object());

CheckpointContents load_checkpoint(const std::filesystem::path& dir);

}  // namespace lesiongen::backbone
