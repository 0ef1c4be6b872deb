#include "lesiongen/data/toy.hpp"

#include <algorithm>
#include <cmath>

#include "lesiongen/captions/prompts.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/image_io.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::data {

namespace fs = std::filesystem;

FourChannelSample make_toy_sample(int image_size, const std::string& category, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x707));
    const int n = image_size;

    const double cx = n * (0.35 + 0.3 * rng.uniform());
    const double cy = n * (0.35 + 0.3 * rng.uniform());
    double rx, ry;
    if (category == "round") {
        rx = ry = n * (0.16 + 0.10 * rng.uniform());
    } else if (category == "elongated") {
        rx = n * (0.22 + 0.10 * rng.uniform());
        ry = rx * 0.45;
    } else {
        rx = n * (0.16 + 0.12 * rng.uniform());
        ry = n * (0.16 + 0.12 * rng.uniform());
    }
    const double theta = rng.uniform() * 3.14159265358979323846;
    const double ct = std::cos(theta), st = std::sin(theta);

    const float bg = static_cast<float>(0.06 + 0.08 * rng.uniform());
    const float fg = static_cast<float>(0.60 + 0.20 * rng.uniform());
    // Reddish-brown tint, brightest in the red plane.
    const float tint[3] = {1.0f, 0.70f + 0.1f * static_cast<float>(rng.uniform()), 0.52f};
    const double edge_sharpness = 7.0;

    FourChannelSample s;
    s.rgb = ImageF(3, n, n);
    s.mask = Mask(n, n);
    s.category = category;
    s.caption = captions::build_generation_prompt(category);
    s.source = Source::real;

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = (ct * dx + st * dy) / rx;
            const double v = (-st * dx + ct * dy) / ry;
            const double d = std::sqrt(u * u + v * v);
            // Soft edge with its midpoint exactly on the mask contour.
            const double blend = 1.0 / (1.0 + std::exp((d - 1.0) * edge_sharpness));
            const float noise = static_cast<float>((rng.uniform() - 0.5) * 0.03);
            for (int c = 0; c < 3; ++c) {
                const float val = bg + static_cast<float>(blend) * (fg * tint[c] - bg) + noise;
                s.rgb.at(c, y, x) = std::clamp(val, 0.f, 1.f);
            }
            s.mask.at(y, x) = d <= 1.0 ? 1 : 0;
        }
    return s;
}

DatasetManifest make_toy_dataset(const fs::path& dir, const ToyDatasetSpec& spec) {
    if (spec.categories.empty()) throw ArgumentError("toy dataset needs at least one category");
    fs::create_directories(dir);

    DatasetManifest m;
    m.root = dir;
    m.label_set = spec.categories;
    for (size_t i = 0; i < spec.count; ++i) {
        const auto& cat = spec.categories[i % spec.categories.size()];
        const auto sample = make_toy_sample(spec.image_size, cat, mix_seed(spec.seed, i));
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%04zu", cat.c_str(), i);
        const std::string img = std::string(name) + ".png";
        const std::string msk = std::string(name) + "_mask.png";
        write_rgb_png(dir / img, sample.rgb);
        write_mask_png(dir / msk, sample.mask);
        m.records.push_back({img, msk, sample.caption, cat, Source::real});
    }
    save_manifest(dir / "manifest.json", m);
    return m;
}

}  // namespace lesiongen::data
