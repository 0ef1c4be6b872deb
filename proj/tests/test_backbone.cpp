#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lesiongen/backbone/checkpoint.hpp"
#include "lesiongen/backbone/lora.hpp"
#include "lesiongen/backbone/surgery.hpp"
#include "lesiongen/backbone/tiny.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

using namespace lesiongen;
using namespace lesiongen::backbone;

namespace {

ConvWeights random_conv(int co, int ci, int k, uint64_t seed) {
    ConvWeights w;
    w.out_ch = co;
    w.in_ch = ci;
    w.kh = w.kw = k;
    w.kernel.resize(w.kernel_size());
    w.bias.resize(co);
    Rng rng(seed);
    rng.fill_normal(w.kernel, 0.5);
    rng.fill_normal(w.bias, 0.1);
    return w;
}

std::vector<float> apply_conv(const ConvWeights& w, const std::vector<float>& x, int h, int wd,
                              int stride, int pad) {
    nn::NoGradGuard ng;
    auto xt = nn::from_vec({w.in_ch, h, wd}, x);
    auto wt = nn::from_vec({w.out_ch, w.in_ch, w.kh, w.kw}, w.kernel);
    auto bt = nn::from_vec({w.out_ch}, w.bias);
    return nn::conv2d(xt, wt, bt, stride, pad).data();
}

}  // namespace

TEST_CASE("inflate_input_conv") {
    const auto base = random_conv(5, 3, 3, 1001);

    SUBCASE("zeros policy: output ignores the new channel bit-exactly") {
        const auto inflated = inflate_input_conv(base, 4, InitPolicy::zeros);
        REQUIRE(inflated.in_ch == 4);
        Rng rng(2002);
        std::vector<float> rgb(3 * 8 * 8), mask(8 * 8);
        rng.fill_normal(rgb);
        rng.fill_normal(mask, 10.0);  // arbitrary contents must not matter
        std::vector<float> rgbm = rgb;
        rgbm.insert(rgbm.end(), mask.begin(), mask.end());
        const auto y3 = apply_conv(base, rgb, 8, 8, 1, 1);
        const auto y4 = apply_conv(inflated, rgbm, 8, 8, 1, 1);
        CHECK(y3 == y4);  // bitwise
    }
    SUBCASE("mean_of_rgb policy: new slice is the channel average") {
        const auto inflated = inflate_input_conv(base, 4, InitPolicy::mean_of_rgb);
        for (int o = 0; o < base.out_ch; ++o)
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    CHECK(inflated.at(o, 3, r, c) ==
                          doctest::Approx((base.at(o, 0, r, c) + base.at(o, 1, r, c) +
                                           base.at(o, 2, r, c)) /
                                          3.f));
    }
    SUBCASE("original weights copied verbatim; bias untouched") {
        const auto inflated = inflate_input_conv(base, 5, InitPolicy::zeros);
        for (int o = 0; o < base.out_ch; ++o)
            for (int i = 0; i < 3; ++i)
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) CHECK(inflated.at(o, i, r, c) == base.at(o, i, r, c));
        CHECK(inflated.bias == base.bias);
    }
    SUBCASE("rejects non-growth") {
        CHECK_THROWS_AS(inflate_input_conv(base, 3, InitPolicy::zeros), ArgumentError);
        CHECK_THROWS_AS(inflate_input_conv(base, 2, InitPolicy::zeros), ArgumentError);
    }
}

TEST_CASE("inflate_output_conv") {
    const auto base = random_conv(3, 4, 3, 1003);

    SUBCASE("zeros policy: new channel output is identically zero") {
        const auto inflated = inflate_output_conv(base, 4, InitPolicy::zeros);
        Rng rng(2004);
        std::vector<float> x(4 * 6 * 6);
        rng.fill_normal(x);
        const auto y = apply_conv(inflated, x, 6, 6, 1, 1);
        for (size_t i = 3 * 36; i < y.size(); ++i) CHECK(y[i] == 0.f);
    }
    SUBCASE("existing outputs unchanged bit-exactly") {
        const auto inflated = inflate_output_conv(base, 4, InitPolicy::zeros);
        Rng rng(2005);
        std::vector<float> x(4 * 6 * 6);
        rng.fill_normal(x);
        const auto y3 = apply_conv(base, x, 6, 6, 1, 1);
        const auto y4 = apply_conv(inflated, x, 6, 6, 1, 1);
        for (size_t i = 0; i < y3.size(); ++i) CHECK(y3[i] == y4[i]);
    }
    SUBCASE("parameter count grows by in_ch*kH*kW + 1") {
        const auto inflated = inflate_output_conv(base, 4, InitPolicy::zeros);
        const size_t grown = inflated.kernel.size() + inflated.bias.size();
        const size_t orig = base.kernel.size() + base.bias.size();
        CHECK(grown - orig == static_cast<size_t>(base.in_ch) * base.kh * base.kw + 1);
    }
    SUBCASE("rejects non-growth") {
        CHECK_THROWS_AS(inflate_output_conv(base, 3, InitPolicy::zeros), ArgumentError);
    }
}

TEST_CASE("lora: fresh adapters leave the forward pass unchanged") {
    TinyBackboneConfig cfg;
    cfg.pixel_channels = 4;
    auto bundle = build_tiny_backbone(cfg);
    const auto cond = bundle->embed_text("a dermoscopic lesion photo of lesion");

    nn::NoGradGuard ng;
    Rng rng(3001);
    std::vector<float> z(4 * 8 * 8);
    rng.fill_normal(z);
    auto zt = nn::from_vec({4, 8, 8}, z);
    const auto before = bundle->denoise(zt, 17, cond).data();

    const auto set = inject_lora(*bundle, 4, 4.f, 99);
    CHECK(set.entries.size() == 12);  // 3 attention blocks x q,k,v,o
    const auto after = bundle->denoise(zt, 17, cond).data();
    CHECK(before == after);  // B = 0 means delta is exactly zero

    SUBCASE("parameter count per layer is r*(d+k)") {
        for (const auto& e : set.entries)
            CHECK(e.a.numel() + e.b.numel() == static_cast<size_t>(4) * (e.d + e.k));
    }
    SUBCASE("rank bound enforced") {
        auto fresh = build_tiny_backbone(cfg);
        CHECK_THROWS_AS(inject_lora(*fresh, 64, 64.f, 1), ArgumentError);
        CHECK_THROWS_AS(inject_lora(*fresh, 0, 0.f, 1), ArgumentError);
    }
}

TEST_CASE("merge_lora") {
    SUBCASE("B = 0 returns W unchanged") {
        const std::vector<float> w{1, 2, 3, 4, 5, 6};
        const std::vector<float> a{0.5f, -0.5f};
        const std::vector<float> b{0, 0, 0};
        CHECK(merge_lora(w, 2, 3, a, b, 1, 1.f) == w);
    }
    SUBCASE("rank-1 2x2 hand check") {
        // W + A B with A=[1;2], B=[3 4] and alpha=rank=1:
        // delta = [[3,4],[6,8]].
        const std::vector<float> w{1, 1, 1, 1};
        const auto merged = merge_lora(w, 2, 2, {1, 2}, {3, 4}, 1, 1.f);
        CHECK(merged == std::vector<float>{4, 5, 7, 9});
    }
    SUBCASE("merged projection equals adapted forward within 1e-5 relative") {
        const int d = 24, k = 16, r = 4;
        Rng rng(3010);
        std::vector<float> w(d * k), a(d * r), b(r * k), bias(k, 0.f);
        rng.fill_normal(w, 0.3);
        rng.fill_normal(a, 0.2);
        rng.fill_normal(b, 0.2);

        LoraLinear lin;
        lin.weight = nn::from_vec({d, k}, w);
        lin.bias = nn::from_vec({k}, bias);
        lin.lora_a = nn::from_vec({d, r}, a);
        lin.lora_b = nn::from_vec({r, k}, b);
        lin.rank = r;
        lin.alpha = static_cast<float>(r);

        const auto merged = merge_lora(w, d, k, a, b, r, static_cast<float>(r));
        nn::NoGradGuard ng;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<float> x(d);
            rng.fill_normal(x);
            auto xt = nn::from_vec({1, d}, x);
            const auto adapted = lin.forward(xt).data();
            auto mt = nn::from_vec({d, k}, merged);
            const auto direct =
                nn::add_row_bias(nn::matmul(xt, mt), nn::from_vec({k}, bias)).data();
            for (int j = 0; j < k; ++j)
                CHECK(adapted[j] ==
                      doctest::Approx(direct[j]).epsilon(1e-5).scale(std::abs(direct[j]) + 1e-3));
        }
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(merge_lora({1, 2}, 2, 2, {1}, {1}, 1, 1.f), ArgumentError);
    }
}

TEST_CASE("trainable_parameters") {
    TinyBackboneConfig cfg;
    cfg.pixel_channels = 3;
    auto bundle = build_tiny_backbone(cfg);

    SUBCASE("no adapters, no surgery: empty set") {
        const auto set = trainable_parameters(*bundle);
        CHECK(set.params.empty());
        CHECK(set.trainable_count == 0);
        CHECK(set.total_count > 0);
    }
    SUBCASE("surgery only: exactly the new channel slices") {
        bundle->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros);
        const auto set = trainable_parameters(*bundle);
        REQUIRE(set.params.size() == 3);  // enc slice, dec row, dec row bias
        for (const auto& p : set.params) CHECK(p.kind == nn::ParamKind::slice);
    }
    SUBCASE("rank 4: adapters + slices stay under 10% of the total") {
        bundle->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros);
        auto set0 = trainable_parameters(*bundle);
        inject_lora(*bundle, 4, 4.f, 5);
        const auto set = trainable_parameters(*bundle);
        CHECK(set.trainable_count > set0.trainable_count);
        CHECK(set.fraction() < 0.10);
    }
}

TEST_CASE("tiny backbone contracts") {
    TinyBackboneConfig cfg;
    cfg.pixel_channels = 4;
    auto bundle = build_tiny_backbone(cfg);

    SUBCASE("encode/decode round trip keeps the pixel shape") {
        Rng rng(4001);
        std::vector<float> px(4 * 32 * 32);
        rng.fill_normal(px, 0.5);
        nn::NoGradGuard ng;
        auto z = bundle->encode(nn::from_vec({4, 32, 32}, px));
        CHECK(z.shape() == std::vector<int>{4, 8, 8});
        auto back = bundle->decode(z);
        CHECK(back.shape() == std::vector<int>{4, 32, 32});
    }
    SUBCASE("decode(encode(x)) is block-averaging for the analytic codec") {
        nn::NoGradGuard ng;
        std::vector<float> px(4 * 32 * 32, 0.25f);
        auto back = bundle->decode(bundle->encode(nn::from_vec({4, 32, 32}, px)));
        for (float v : back.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-5));
    }
    SUBCASE("text embedding is deterministic and caption-sensitive") {
        const auto a = bundle->embed_text("a dermoscopic lesion photo of melanoma");
        const auto b = bundle->embed_text("a dermoscopic lesion photo of melanoma");
        const auto c = bundle->embed_text("a dermoscopic lesion photo of nevus");
        CHECK(a.tokens.data() == b.tokens.data());
        CHECK(a.tokens.data() != c.tokens.data());
        CHECK_FALSE(a.null_flag);
        CHECK(bundle->null_conditioning().null_flag);
    }
    SUBCASE("denoiser output shape equals the latent shape for all t") {
        nn::NoGradGuard ng;
        const auto cond = bundle->embed_text("prompt");
        Rng rng(4002);
        std::vector<float> z(4 * 8 * 8);
        rng.fill_normal(z);
        for (int t : {1, 50, 200}) {
            auto out = bundle->denoise(nn::from_vec({4, 8, 8}, z), t, cond);
            CHECK(out.shape() == std::vector<int>{4, 8, 8});
        }
    }
}

TEST_CASE("surgery on the tiny backbone preserves RGB decoding bit-exactly") {
    TinyBackboneConfig cfg;
    cfg.pixel_channels = 3;
    auto before = build_tiny_backbone(cfg);
    auto after = build_tiny_backbone(cfg);
    after->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros);
    CHECK(after->pixel_channels() == 4);
    CHECK(after->has_surgery());

    nn::NoGradGuard ng;
    Rng rng(4010);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<float> z(4 * 8 * 8);
        rng.fill_normal(z);
        const auto d3 = before->decode(nn::from_vec({4, 8, 8}, z)).data();
        const auto d4 = after->decode(nn::from_vec({4, 8, 8}, z)).data();
        for (size_t i = 0; i < d3.size(); ++i) CHECK(d3[i] == d4[i]);  // RGB planes bitwise
        // The fresh mask plane decodes to logit 0 (probability one-half).
        for (size_t i = d3.size(); i < d4.size(); ++i) CHECK(d4[i] == 0.f);
    }

    SUBCASE("encoder ignores the mask before training") {
        std::vector<float> rgb(3 * 32 * 32), mask(32 * 32);
        rng.fill_normal(rgb);
        rng.fill_normal(mask, 3.0);
        std::vector<float> four = rgb;
        four.insert(four.end(), mask.begin(), mask.end());
        const auto z3 = before->encode(nn::from_vec({3, 32, 32}, rgb)).data();
        const auto z4 = after->encode(nn::from_vec({4, 32, 32}, four)).data();
        CHECK(z3 == z4);
    }
    SUBCASE("double surgery rejected") {
        CHECK_THROWS_AS(after->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros),
                        ArgumentError);
    }
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "lg_ckpt_test";
    fs::remove_all(dir);

    TinyBackboneConfig cfg;
    cfg.pixel_channels = 3;
    cfg.init_seed = 77;
    auto bundle = build_tiny_backbone(cfg);
    bundle->apply_four_channel_surgery(InitPolicy::zeros, InitPolicy::zeros);
    auto adapters = inject_lora(*bundle, 4, 4.f, 11);

    // Perturb a few tensors so the reload has something non-default to match.
    Rng rng(5001);
    for (auto& p : bundle->parameters())
        if (p.kind != nn::ParamKind::base)
            for (auto& v : p.tensor.data()) v += static_cast<float>(rng.normal() * 0.01);

    const auto sched = diffusion::default_tiny_schedule();
    save_checkpoint(dir, *bundle, &adapters, sched);
    CHECK(fs::exists(dir / "meta.json"));
    CHECK(fs::exists(dir / "base.bin"));
    CHECK(fs::exists(dir / "slices.bin"));
    CHECK(fs::exists(dir / "adapters.bin"));

    auto loaded = load_checkpoint(dir);
    CHECK(loaded.schedule.T == sched.T);
    CHECK(loaded.adapters.rank == 4);
    CHECK(loaded.bundle->pixel_channels() == 4);

    auto pa = bundle->parameters();
    auto pb = loaded.bundle->parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(pa[i].tensor.data() == pb[i].tensor.data());
    }

    nn::NoGradGuard ng;
    std::vector<float> z(4 * 8 * 8);
    rng.fill_normal(z);
    const auto cond_a = bundle->embed_text("check");
    const auto cond_b = loaded.bundle->embed_text("check");
    CHECK(bundle->denoise(nn::from_vec({4, 8, 8}, z), 9, cond_a).data() ==
          loaded.bundle->denoise(nn::from_vec({4, 8, 8}, z), 9, cond_b).data());
}
