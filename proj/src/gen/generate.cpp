#include "lesiongen/gen/generate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include "lesiongen/captions/prompts.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/image_io.hpp"

namespace lesiongen::gen {

namespace fs = std::filesystem;

void GenerationConfig::validate(const backbone::Backbone& bundle) const {
    if (steps < 1) throw ConfigError("generation: steps must be >= 1");
    if (resolution < 1 || resolution % bundle.downsample_factor() != 0)
        throw ConfigError("generation: resolution must be a positive multiple of the backbone "
                          "downsample factor " +
                          std::to_string(bundle.downsample_factor()));
    if (eta < 0) throw ConfigError("generation: eta must be >= 0");
    if (workers < 1) throw ConfigError("generation: workers must be >= 1");
}

std::pair<ImageF, ImageF> split_channels(const ImageF& four_channel) {
    if (four_channel.channels != 4)
        throw ArgumentError("split_channels: expected exactly 4 channels, got " +
                            std::to_string(four_channel.channels));
    ImageF rgb(3, four_channel.height, four_channel.width);
    ImageF logits(1, four_channel.height, four_channel.width);
    const size_t plane = four_channel.plane();
    std::copy_n(four_channel.px.begin(), 3 * plane, rgb.px.begin());
    std::copy_n(four_channel.px.begin() + 3 * plane, plane, logits.px.begin());
    return {std::move(rgb), std::move(logits)};
}

Mask binarize_mask(const ImageF& logits) {
    if (logits.channels != 1) throw ArgumentError("binarize_mask: expected 1 channel");
    Mask m(logits.height, logits.width);
    for (size_t i = 0; i < logits.px.size(); ++i) m.px[i] = logits.px[i] >= 0.f ? 1 : 0;
    return m;
}

ImageF denormalize_rgb(const ImageF& raw) {
    ImageF out = raw;
    for (auto& v : out.px) v = std::clamp((v + 1.f) * 0.5f, 0.f, 1.f);
    return out;
}

GeneratedPair generate_pair(const std::string& prompt, uint64_t seed, const GenerationConfig& cfg,
                            backbone::Backbone& bundle, const diffusion::NoiseSchedule& sched) {
    if (prompt.empty()) throw ArgumentError("generate_pair: empty prompt");
    cfg.validate(bundle);
    if (bundle.pixel_channels() != 4)
        throw ConfigError("generate_pair: backbone has no mask channel (channel surgery missing)");

    nn::NoGradGuard no_grad;
    const int f = bundle.downsample_factor();
    const std::vector<int> latent_shape{bundle.latent_channels(), cfg.resolution / f,
                                        cfg.resolution / f};
    const auto cond = bundle.embed_text(prompt);
    const auto latent = diffusion::sample_latent(bundle, cond, sched, cfg.sampler(), latent_shape, seed);

    std::vector<float> zf(latent.z.begin(), latent.z.end());
    auto decoded = bundle.decode(nn::from_vec(latent_shape, std::move(zf)));

    ImageF four(4, cfg.resolution, cfg.resolution);
    four.px = decoded.data();
    auto [rgb_raw, logits] = split_channels(four);
    return {denormalize_rgb(rgb_raw), binarize_mask(logits)};
}

data::DatasetManifest batch_generate(const std::map<std::string, size_t>& classes,
                                     const GenerationConfig& cfg, backbone::Backbone& bundle,
                                     const diffusion::NoiseSchedule& sched) {
    cfg.validate(bundle);
    fs::create_directories(cfg.out_dir);

    struct Job {
        std::string category;
        std::string prompt;
        uint64_t seed;
        size_t index;  // per-category
    };
    std::vector<Job> jobs;
    uint64_t running = 0;
    for (const auto& [category, count] : classes) {
        const std::string prompt = captions::build_generation_prompt(category);
        for (size_t i = 0; i < count; ++i) jobs.push_back({category, prompt, cfg.seed + running++, i});
    }

    data::DatasetManifest manifest;
    manifest.root = cfg.out_dir;
    for (const auto& [category, count] : classes) manifest.label_set.push_back(category);
    manifest.records.resize(jobs.size());

    std::atomic<size_t> next{0};
    std::mutex failure_mutex;
    std::string failure;

    auto worker = [&]() {
        for (;;) {
            const size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const auto& job = jobs[j];
            try {
                const auto pair = generate_pair(job.prompt, job.seed, cfg, bundle, sched);
                char stem[128];
                std::snprintf(stem, sizeof(stem), "%s_%llu_%04zu", job.category.c_str(),
                              static_cast<unsigned long long>(job.seed), job.index);
                const std::string img = std::string(stem) + ".png";
                const std::string msk = std::string(stem) + "_mask.png";
                write_rgb_png(cfg.out_dir / img, pair.rgb);
                write_mask_png(cfg.out_dir / msk, pair.mask);
                manifest.records[j] = {img, msk, job.prompt, job.category, data::Source::synthetic};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(failure_mutex);
                if (failure.empty()) failure = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t n = std::min<size_t>(static_cast<size_t>(cfg.workers), std::max<size_t>(jobs.size(), 1));
    for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!failure.empty()) {
        // Keep whatever completed discoverable for recovery.
        data::DatasetManifest partial;
        partial.root = manifest.root;
        partial.label_set = manifest.label_set;
        for (auto& r : manifest.records)
            if (!r.image.empty()) partial.records.push_back(r);
        data::save_manifest(cfg.out_dir / "manifest-partial.json", partial);
        throw IoError("batch_generate failed (" + failure + "); partial manifest written to " +
                      (cfg.out_dir / "manifest-partial.json").string());
    }

    data::save_manifest(cfg.out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace lesiongen::gen
