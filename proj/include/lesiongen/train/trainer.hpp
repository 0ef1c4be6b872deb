#pragma once

#include <filesystem>

#include "lesiongen/backbone/checkpoint.hpp"
#include "lesiongen/backbone/lora.hpp"
#include "lesiongen/core/optim.hpp"
#include "lesiongen/data/augment.hpp"
#include "lesiongen/data/manifest.hpp"
#include "lesiongen/diffusion/schedule.hpp"
#include "lesiongen/train/losses.hpp"

namespace lesiongen::train {

// Which parameters the optimizer may touch. `adapters` is the fine-tuning
// contract (LoRA pairs + inflated slices, base frozen); `full` exists to
// prepare the tiny pretrained checkpoint and is never the fine-tuning default.
enum class TrainScope { adapters, full };

struct TrainConfig {
    int epochs = 100;
    int batch_size = 4;
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    double caption_dropout = 0.1;
    double grad_clip = 1.0;
    int image_size = 32;  // training resolution
    uint64_t seed = 0;
    int checkpoint_every_epochs = 0;  // 0: final checkpoint only
    LossWeights weights;
    data::AugmentationConfig augment = data::AugmentationConfig::identity();
    TrainScope scope = TrainScope::adapters;
    std::filesystem::path out_dir = "train-out";
    std::filesystem::path resume_from;  // checkpoint dir with training state

    void validate() const;
};

struct StepMetrics {
    double l_diffusion = 0.0;
    double l_mask = 0.0;
    double l_dice = 0.0;
    double l_total = 0.0;
};

// One optimizer step over a batch: encode four-channel pixels, corrupt at
// per-sample uniform timesteps, predict noise (captions dropped to the null
// embedding with probability cfg.caption_dropout), decode the x0 estimate's
// fourth channel for the mask losses, and update the trainable set only.
// The decoder never runs when both mask weights are zero.
StepMetrics training_step(const std::vector<data::FourChannelSample>& batch,
                          backbone::Backbone& bundle, const backbone::TrainableSet& trainable,
                          const diffusion::NoiseSchedule& sched, const LossWeights& weights,
                          const TrainConfig& cfg, nn::AdamW& opt, uint64_t step_seed);

struct FitResult {
    std::filesystem::path checkpoint_dir;
    std::filesystem::path curve_csv;
    std::vector<double> epoch_mean_total;  // indexed by epoch
    std::vector<StepMetrics> steps;
};

// Runs epochs x steps with per-(seed,epoch,step) derived randomness so a
// resumed run reproduces the uninterrupted one exactly. Emits the per-step
// loss curve as CSV and checkpoints per cadence.
FitResult fit(const data::DatasetManifest& manifest, backbone::TinyBackbone& bundle,
              backbone::LoraAdapterSet* adapters, const diffusion::ScheduleConfig& sched_cfg,
              const TrainConfig& cfg);

}  // namespace lesiongen::train
