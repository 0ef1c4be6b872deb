#include "lesiongen/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lesiongen/core/array_store.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/diffusion/process.hpp"

namespace lesiongen::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw ArgumentError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("train config: batch size must be >= 1");
    if (learning_rate <= 0) throw ArgumentError("train config: learning rate must be > 0");
    if (caption_dropout < 0 || caption_dropout > 1)
        throw ArgumentError("train config: caption dropout must be in [0,1]");
    if (image_size < 1) throw ArgumentError("train config: image size must be >= 1");
    weights.validate();
    augment.validate();
}

namespace {

// rgb in [0,1] -> [-1,1]; mask {0,1} -> {-1,+1}, stacked as the 4th plane.
nn::Tensor sample_to_pixels(const data::FourChannelSample& s, int pixel_channels) {
    const int h = s.rgb.height, w = s.rgb.width;
    const size_t plane = s.rgb.plane();
    std::vector<float> px(static_cast<size_t>(pixel_channels) * plane);
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i) px[c * plane + i] = s.rgb.px[c * plane + i] * 2.f - 1.f;
    if (pixel_channels == 4)
        for (size_t i = 0; i < plane; ++i) px[3 * plane + i] = s.mask.px[i] ? 1.f : -1.f;
    return nn::from_vec({pixel_channels, h, w}, std::move(px));
}

nn::Tensor mask_target01(const data::FourChannelSample& s) {
    std::vector<float> t(s.mask.px.size());
    for (size_t i = 0; i < t.size(); ++i) t[i] = s.mask.px[i] ? 1.f : 0.f;
    return nn::from_vec({1, s.mask.height, s.mask.width}, std::move(t));
}

fs::path optimizer_state_path(const fs::path& ckpt_dir) { return ckpt_dir / "optim.bin"; }
fs::path train_state_path(const fs::path& ckpt_dir) { return ckpt_dir / "train_state.json"; }

void save_training_state(const fs::path& ckpt_dir, const nn::AdamW& opt, int next_epoch) {
    ArrayMap state;
    for (const auto& [name, slot] : opt.state()) {
        state.emplace("m:" + name, NamedArray{{static_cast<int>(slot.m.size())}, slot.m});
        state.emplace("v:" + name, NamedArray{{static_cast<int>(slot.v.size())}, slot.v});
        state.emplace("t:" + name,
                      NamedArray{{1}, std::vector<float>{static_cast<float>(slot.t)}});
    }
    save_arrays(optimizer_state_path(ckpt_dir), state);
    std::ofstream out(train_state_path(ckpt_dir));
    out << nlohmann::json{{"next_epoch", next_epoch}}.dump(2) << "\n";
}

int load_training_state(const fs::path& ckpt_dir, nn::AdamW& opt) {
    std::ifstream in(train_state_path(ckpt_dir));
    if (!in) throw IoError("resume: missing training state in " + ckpt_dir.string());
    const int next_epoch = nlohmann::json::parse(in).at("next_epoch").get<int>();
    const auto arrays = load_arrays(optimizer_state_path(ckpt_dir));
    for (const auto& [key, arr] : arrays) {
        if (key.rfind("m:", 0) == 0) opt.state()[key.substr(2)].m = arr.data;
        else if (key.rfind("v:", 0) == 0) opt.state()[key.substr(2)].v = arr.data;
        else if (key.rfind("t:", 0) == 0)
            opt.state()[key.substr(2)].t = static_cast<int64_t>(arr.data.at(0));
    }
    return next_epoch;
}

}  // namespace

StepMetrics training_step(const std::vector<data::FourChannelSample>& batch,
                          backbone::Backbone& bundle, const backbone::TrainableSet& trainable,
                          const diffusion::NoiseSchedule& sched, const LossWeights& weights,
                          const TrainConfig& cfg, nn::AdamW& opt, uint64_t step_seed) {
    if (batch.empty()) throw ArgumentError("training_step: empty batch");
    weights.validate();
    const bool mask_losses = weights.needs_mask_losses();
    if (mask_losses && bundle.pixel_channels() != 4)
        throw ConfigError("mask losses need a four-channel backbone (run the channel surgery)");

    nn::zero_grads(trainable.params);
    StepMetrics metrics;
    const float inv_b = 1.f / static_cast<float>(batch.size());
    const size_t latent_numel = [&] {
        const int f = bundle.downsample_factor();
        const int h = batch.front().rgb.height, w = batch.front().rgb.width;
        if (h % f != 0 || w % f != 0)
            throw ConfigError("training resolution not divisible by backbone downsample factor");
        return static_cast<size_t>(bundle.latent_channels()) * (h / f) * (w / f);
    }();

    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& s = batch[i];
        Rng rng(mix_seed(step_seed, i, 0x57e9));
        const int t = static_cast<int>(rng.uniform_int(1, sched.T));
        const bool drop_caption = rng.uniform() < cfg.caption_dropout;

        auto pixels = sample_to_pixels(s, bundle.pixel_channels());
        auto z0 = bundle.encode(pixels);
        if (z0.numel() != latent_numel) throw ConfigError("latent shape drift across batch");

        std::vector<float> eps_v(latent_numel);
        rng.fill_normal(eps_v);
        auto eps = nn::from_vec(z0.shape(), std::move(eps_v));
        auto z_t = diffusion::q_sample(z0, t, eps, sched);

        const auto cond = drop_caption ? bundle.null_conditioning() : bundle.embed_text(s.caption);
        auto eps_hat = bundle.denoise(z_t, t, cond);
        auto l_diff = nn::mse_loss(eps_hat, eps);

        nn::Tensor l_mask, l_dice;
        if (mask_losses) {
            auto x0_hat = diffusion::predict_x0(z_t, eps_hat, t, sched);
            auto decoded = bundle.decode(x0_hat);
            auto logits = nn::slice_channels(decoded, 3, 4);
            auto target = mask_target01(s);
            l_mask = nn::bce_with_logits_loss(logits, target);
            l_dice = nn::soft_dice_loss(logits, target, 1.f);
        } else {
            l_mask = nn::constant({1}, 0.f);
            l_dice = nn::constant({1}, 0.f);
        }

        auto total = nn::scale(l_diff, static_cast<float>(weights.lambda_diffusion));
        total = nn::axpby(1.f, total, static_cast<float>(weights.lambda_mask), l_mask);
        total = nn::axpby(1.f, total, static_cast<float>(weights.lambda_dice), l_dice);

        if (!std::isfinite(total.item()))
            throw TrainingDivergenceError("non-finite loss (step seed " +
                                          std::to_string(step_seed) + ", sample " +
                                          std::to_string(i) + ", t=" + std::to_string(t) + ")");

        metrics.l_diffusion += l_diff.item() * inv_b;
        metrics.l_mask += l_mask.item() * inv_b;
        metrics.l_dice += l_dice.item() * inv_b;
        metrics.l_total += total.item() * inv_b;

        nn::backward(nn::scale(total, inv_b));
    }

    nn::AdamW::clip_grad_norm(trainable.params, cfg.grad_clip);
    opt.step(trainable.params);
    return metrics;
}

FitResult fit(const data::DatasetManifest& manifest, backbone::TinyBackbone& bundle,
              backbone::LoraAdapterSet* adapters, const diffusion::ScheduleConfig& sched_cfg,
              const TrainConfig& cfg) {
    cfg.validate();
    if (manifest.records.empty()) throw ArgumentError("fit: empty manifest");
    const auto sched = diffusion::make_schedule(sched_cfg);

    auto trainable = cfg.scope == TrainScope::adapters ? backbone::trainable_parameters(bundle)
                                                       : backbone::all_parameters(bundle);
    if (trainable.params.empty())
        throw ConfigError("fit: nothing to train (inject adapters or apply surgery first)");

    // Decode and resize once; augmentation happens per (epoch, index) at batch
    // composition and is never materialized.
    std::vector<data::FourChannelSample> samples;
    samples.reserve(manifest.records.size());
    for (const auto& r : manifest.records)
        samples.push_back(data::resize_sample(data::load_sample(manifest, r), cfg.image_size,
                                              cfg.image_size));

    nn::AdamW opt({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    int start_epoch = 0;
    if (!cfg.resume_from.empty()) start_epoch = load_training_state(cfg.resume_from, opt);

    fs::create_directories(cfg.out_dir);
    const fs::path curve_path = cfg.out_dir / "training_curve.csv";
    std::ofstream curve(curve_path);
    if (!curve) throw IoError("cannot write " + curve_path.string());
    curve << "epoch,step,L_diffusion,L_mask,L_dice,L_total\n";

    FitResult result;
    result.curve_csv = curve_path;
    result.epoch_mean_total.assign(static_cast<size_t>(cfg.epochs), 0.0);

    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0x0e70c4, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_total = 0.0;
        int steps_in_epoch = 0;
        for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++steps_in_epoch) {
            const size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::vector<data::FourChannelSample> batch;
            batch.reserve(end - begin);
            for (size_t j = begin; j < end; ++j)
                batch.push_back(data::augment_pair(
                    samples[order[j]], cfg.augment,
                    mix_seed(cfg.seed ^ 0xa06a06, static_cast<uint64_t>(epoch), order[j])));

            const uint64_t step_seed =
                mix_seed(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(steps_in_epoch));
            StepMetrics m;
            try {
                m = training_step(batch, bundle, trainable, sched, cfg.weights, cfg, opt, step_seed);
            } catch (const TrainingDivergenceError& e) {
                throw TrainingDivergenceError("epoch " + std::to_string(epoch) + " step " +
                                              std::to_string(steps_in_epoch) + ": " + e.what());
            }
            char row[192];
            std::snprintf(row, sizeof(row), "%d,%d,%.9g,%.9g,%.9g,%.9g\n", epoch, steps_in_epoch,
                          m.l_diffusion, m.l_mask, m.l_dice, m.l_total);
            curve << row;
            epoch_total += m.l_total;
            result.steps.push_back(m);
        }
        curve.flush();
        result.epoch_mean_total[epoch] = epoch_total / std::max(1, steps_in_epoch);

        const bool cadence_hit =
            cfg.checkpoint_every_epochs > 0 && (epoch + 1) % cfg.checkpoint_every_epochs == 0;
        if (cadence_hit) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint-epoch-%04d", epoch + 1);
            const fs::path dir = cfg.out_dir / name;
            backbone::save_checkpoint(dir, bundle, adapters, sched_cfg,
                                      {{"epochs_completed", epoch + 1}});
            save_training_state(dir, opt, epoch + 1);
        }
    }

    const fs::path final_dir = cfg.out_dir / "checkpoint-final";
    backbone::save_checkpoint(final_dir, bundle, adapters, sched_cfg,
                              {{"epochs_completed", cfg.epochs}});
    save_training_state(final_dir, opt, cfg.epochs);
    result.checkpoint_dir = final_dir;
    return result;
}

}  // namespace lesiongen::train
