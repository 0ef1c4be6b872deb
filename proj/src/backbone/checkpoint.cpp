#include "lesiongen/backbone/checkpoint.hpp"

#include <fstream>

#include "lesiongen/core/array_store.hpp"
#include "lesiongen/core/error.hpp"

namespace lesiongen::backbone {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, TinyBackbone& bundle, const LoraAdapterSet* adapters,
                     const diffusion::ScheduleConfig& schedule, const nlohmann::json& extra) {
    fs::create_directories(dir);
    ArrayMap base, slices, adapter_arrays;
    for (const auto& p : bundle.parameters()) {
        NamedArray arr{p.tensor.shape(), p.tensor.data()};
        switch (p.kind) {
            case nn::ParamKind::base: base.emplace(p.name, std::move(arr)); break;
            case nn::ParamKind::slice: slices.emplace(p.name, std::move(arr)); break;
            case nn::ParamKind::adapter: adapter_arrays.emplace(p.name, std::move(arr)); break;
        }
    }
    save_arrays(dir / "base.bin", base);
    if (!slices.empty()) save_arrays(dir / "slices.bin", slices);
    if (!adapter_arrays.empty()) save_arrays(dir / "adapters.bin", adapter_arrays);

    const auto& cfg = bundle.config();
    nlohmann::json meta{
        {"format", "lesiongen-checkpoint-1"},
        {"kind", bundle.kind()},
        {"base_ref", "base.bin"},
        {"backbone",
         {{"image_size", cfg.image_size},
          {"pixel_channels", cfg.pixel_channels},
          {"latent_channels", cfg.latent_channels},
          {"downsample", cfg.downsample},
          {"width", cfg.width},
          {"embed_width", cfg.embed_width},
          {"norm_groups", cfg.norm_groups},
          {"scale_factor", cfg.scale_factor},
          {"init_seed", cfg.init_seed}}},
        {"surgery", bundle.has_surgery()},
        {"schedule",
         {{"kind", diffusion::to_string(schedule.kind)},
          {"T", schedule.T},
          {"beta_start", schedule.beta_start},
          {"beta_end", schedule.beta_end}}},
    };
    if (adapters && !adapters->entries.empty())
        meta["lora"] = {{"rank", adapters->rank}, {"alpha", adapters->alpha}};
    if (!extra.empty()) meta["extra"] = extra;
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot write checkpoint meta: " + (dir / "meta.json").string());
    out << meta.dump(2) << "\n";
}

namespace {

void load_into(const ArrayMap& arrays, std::vector<nn::Param>& params, nn::ParamKind kind,
               const fs::path& src) {
    for (auto& p : params) {
        if (p.kind != kind) continue;
        auto it = arrays.find(p.name);
        if (it == arrays.end())
            throw IoError("checkpoint " + src.string() + " missing parameter " + p.name);
        if (it->second.data.size() != p.tensor.numel())
            throw IoError("checkpoint parameter size mismatch: " + p.name);
        p.tensor.data() = it->second.data;
    }
}

}  // namespace

CheckpointContents load_checkpoint(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.json";
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot read checkpoint meta: " + meta_path.string());
    nlohmann::json meta = nlohmann::json::parse(in);
    if (meta.value("kind", "") != "tiny")
        throw ConfigError("unsupported backbone kind '" + meta.value("kind", "") +
                          "'; this build hosts the tiny backbone (point an external backbone "
                          "at its own runtime)");

    CheckpointContents out;
    out.meta = meta;
    const auto& b = meta.at("backbone");
    TinyBackboneConfig cfg;
    cfg.image_size = b.at("image_size").get<int>();
    cfg.pixel_channels = b.at("pixel_channels").get<int>();
    cfg.latent_channels = b.at("latent_channels").get<int>();
    cfg.downsample = b.at("downsample").get<int>();
    cfg.width = b.at("width").get<int>();
    cfg.embed_width = b.at("embed_width").get<int>();
    cfg.norm_groups = b.at("norm_groups").get<int>();
    cfg.scale_factor = b.at("scale_factor").get<float>();
    cfg.init_seed = b.at("init_seed").get<uint64_t>();

    const bool surgery = meta.value("surgery", false);
    if (surgery) cfg.pixel_channels = 3;
    out.bundle = build_tiny_backbone(cfg);
    if (surgery)
        out.bundle->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros);

    if (meta.contains("lora")) {
        const int rank = meta["lora"].at("rank").get<int>();
        const float alpha = meta["lora"].at("alpha").get<float>();
        out.adapters = inject_lora(*out.bundle, rank, alpha, 0);
    }

    auto params = out.bundle->parameters();
    load_into(load_arrays(dir / "base.bin"), params, nn::ParamKind::base, dir / "base.bin");
    if (surgery)
        load_into(load_arrays(dir / "slices.bin"), params, nn::ParamKind::slice, dir / "slices.bin");
    if (meta.contains("lora"))
        load_into(load_arrays(dir / "adapters.bin"), params, nn::ParamKind::adapter,
                  dir / "adapters.bin");

    const auto& s = meta.at("schedule");
    out.schedule.kind = diffusion::schedule_kind_from_string(s.at("kind").get<std::string>());
    out.schedule.T = s.at("T").get<int>();
    out.schedule.beta_start = s.at("beta_start").get<double>();
    out.schedule.beta_end = s.at("beta_end").get<double>();
    return out;
}

}  // namespace lesiongen::backbone
