// Acceptance suite: runs every acceptance criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
//   acceptance --cache-dir DIR --golden-dir DIR [--cli PATH]
//
// The cache directory holds the pretrained tiny checkpoint so reruns skip the
// desk-scale pretraining; delete it to force a fresh run.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "lesiongen/backbone/checkpoint.hpp"
#include "lesiongen/backbone/lora.hpp"
#include "lesiongen/backbone/surgery.hpp"
#include "lesiongen/backbone/tiny.hpp"
#include "lesiongen/captions/prompts.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"
#include "lesiongen/data/split.hpp"
#include "lesiongen/data/toy.hpp"
#include "lesiongen/diffusion/process.hpp"
#include "lesiongen/gen/generate.hpp"
#include "lesiongen/harness/experiment.hpp"
#include "lesiongen/metrics/classification.hpp"
#include "lesiongen/metrics/features.hpp"
#include "lesiongen/metrics/perceptual.hpp"
#include "lesiongen/metrics/report.hpp"
#include "lesiongen/metrics/segmentation.hpp"
#include "lesiongen/train/losses.hpp"
#include "lesiongen/train/trainer.hpp"
#include "../oracles.hpp"

namespace fs = std::filesystem;
using namespace lesiongen;

namespace {

struct Check {
    std::vector<std::string> failures;
    void require(bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    }
};

fs::path g_cache_dir = "acceptance-cache";
fs::path g_golden_dir = "tests/golden";
std::string g_cli_path;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + g_cli_path + "\" " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Diffusion math: Monte-Carlo forward equivalence and exact inversion.
// ---------------------------------------------------------------------------
void criterion_1(Check& c) {
    const auto sched = diffusion::make_schedule(diffusion::default_tiny_schedule());
    const std::vector<double> x0{0.45, -0.80, 1.30, 0.05};
    const int t = 10;
    const int n = 100000;

    std::vector<double> mean(x0.size(), 0.0), m2(x0.size(), 0.0);
    Rng rng(mix_seed(20240811, 0x0acc));
    for (int trial = 0; trial < n; ++trial) {
        const auto x = diffusion::iterated_forward_equivalence(x0, t, sched, rng);
        for (size_t i = 0; i < x.size(); ++i) {
            mean[i] += x[i];
            m2[i] += x[i] * x[i];
        }
    }
    const double ab = sched.alpha_bar_at(t);
    const double sigma = std::sqrt(1.0 - ab);
    for (size_t i = 0; i < x0.size(); ++i) {
        mean[i] /= n;
        const double var = m2[i] / n - mean[i] * mean[i];
        const double mean_err = std::abs(mean[i] - std::sqrt(ab) * x0[i]);
        const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n));
        c.require(mean_err < bound, "element " + std::to_string(i) + " mean error " +
                                        fmt(mean_err) + " exceeds 3*sigma/sqrt(n) = " + fmt(bound));
        const double var_rel = std::abs(var / (1.0 - ab) - 1.0);
        c.require(var_rel < 0.01, "element " + std::to_string(i) + " variance off by " +
                                      fmt(100 * var_rel) + "%");
    }

    // predict_x0(q_sample(x0)) == x0 to <= 1e-6 relative, across timesteps.
    Rng rng2(7);
    std::vector<double> big(64), eps(64);
    for (auto& v : big) v = rng2.normal() * 2.0;
    for (auto& v : eps) v = rng2.normal();
    for (int tt : {1, 3, 25, 100, sched.T}) {
        const auto zt = diffusion::q_sample(big, tt, eps, sched);
        const auto rec = diffusion::predict_x0(zt, eps, tt, sched);
        for (size_t i = 0; i < big.size(); ++i) {
            const double rel = std::abs(rec[i] - big[i]) / std::max(1e-12, std::abs(big[i]));
            c.require(rel <= 1e-6, "x0 recovery at t=" + std::to_string(tt) + " rel error " +
                                       fmt(rel));
        }
    }
}

// ---------------------------------------------------------------------------
// 2. Surgery equivalence and adapter transparency.
// ---------------------------------------------------------------------------
void criterion_2(Check& c) {
    backbone::TinyBackboneConfig cfg;
    cfg.pixel_channels = 3;
    auto before = backbone::build_tiny_backbone(cfg);
    auto after = backbone::build_tiny_backbone(cfg);
    after->apply_four_channel_surgery(backbone::InitPolicy::zeros, backbone::InitPolicy::zeros);

    nn::NoGradGuard ng;
    Rng rng(4242);
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> z(4 * 8 * 8);
        rng.fill_normal(z);
        const auto d3 = before->decode(nn::from_vec({4, 8, 8}, z)).data();
        const auto d4 = after->decode(nn::from_vec({4, 8, 8}, z)).data();
        bool same = true;
        for (size_t i = 0; i < d3.size(); ++i) same = same && d3[i] == d4[i];
        exact += same;
    }
    c.require(exact == 100, "zero-init surgery RGB equivalence bit-exact on only " +
                                std::to_string(exact) + "/100 inputs");

    // Fresh adapters (B = 0) leave the denoiser output unchanged bit-exactly.
    backbone::TinyBackboneConfig cfg4;
    cfg4.pixel_channels = 4;
    auto base = backbone::build_tiny_backbone(cfg4);
    auto adapted = backbone::build_tiny_backbone(cfg4);
    backbone::inject_lora(*adapted, 4, 4.f, 33);
    const auto cond_base = base->embed_text("a dermoscopic lesion photo of lesion");
    const auto cond_adapted = adapted->embed_text("a dermoscopic lesion photo of lesion");
    int unchanged = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> z(4 * 8 * 8);
        rng.fill_normal(z);
        auto zt = nn::from_vec({4, 8, 8}, z);
        const int t = 1 + trial % 200;
        unchanged += base->denoise(zt, t, cond_base).data() ==
                     adapted->denoise(zt, t, cond_adapted).data();
    }
    c.require(unchanged == 100, "fresh adapters changed outputs on " +
                                    std::to_string(100 - unchanged) + "/100 inputs");

    // Merged weights agree with the adapted forward pass within 1e-5 relative.
    const int d = 48, k = 48, r = 4;
    std::vector<float> w(d * k), a(d * r), b(r * k), bias(k);
    rng.fill_normal(w, 0.3);
    rng.fill_normal(a, 0.2);
    rng.fill_normal(b, 0.2);
    rng.fill_normal(bias, 0.05);
    backbone::LoraLinear lin;
    lin.weight = nn::from_vec({d, k}, w);
    lin.bias = nn::from_vec({k}, bias);
    lin.lora_a = nn::from_vec({d, r}, a);
    lin.lora_b = nn::from_vec({r, k}, b);
    lin.rank = r;
    lin.alpha = static_cast<float>(r);
    const auto merged = backbone::merge_lora(w, d, k, a, b, r, static_cast<float>(r));
    auto mt = nn::from_vec({d, k}, merged);
    auto bt = nn::from_vec({k}, bias);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> x(d);
        rng.fill_normal(x);
        auto xt = nn::from_vec({1, d}, x);
        const auto adapted_fwd = lin.forward(xt).data();
        const auto merged_fwd = nn::add_row_bias(nn::matmul(xt, mt), bt).data();
        for (int j = 0; j < k; ++j) {
            const double rel = std::abs(adapted_fwd[j] - merged_fwd[j]) /
                               std::max(1e-3, std::abs(static_cast<double>(merged_fwd[j])));
            worst = std::max(worst, rel);
        }
    }
    c.require(worst <= 1e-5, "merged-vs-adapted relative error " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 3. Loss correctness: pinned values and finite-difference gradients.
// ---------------------------------------------------------------------------
void criterion_3(Check& c) {
    using namespace lesiongen::train;

    MaskPrediction dice_case;
    dice_case.logits.assign(4, -1e4);  // p -> 0
    dice_case.target.assign(4, 1.0);
    dice_case.smoothing = 1.0;
    const double dice_val = dice_loss(dice_case);
    c.require(std::abs(dice_val - 0.8) < 1e-12,
              "dice_loss(p=0, y=1^4, eps=1) = " + fmt(dice_val) + ", expected 0.8");

    MaskPrediction bce_case;
    bce_case.logits.assign(64, 0.0);  // p = 0.5
    Rng rb(3);
    bce_case.target.resize(64);
    for (auto& v : bce_case.target) v = rb.uniform() < 0.5 ? 1.0 : 0.0;
    const double bce_val = bce_mask_loss(bce_case);
    c.require(std::abs(bce_val - std::log(2.0)) <= 1e-9,
              "bce at p=0.5 = " + fmt(bce_val) + ", expected ln 2");

    // Gradients vs central finite differences (h = 1e-4) on random 8x8 instances.
    for (uint64_t seed : {101ull, 102ull, 103ull}) {
        MaskPrediction mp;
        Rng rng(seed);
        mp.logits.resize(64);
        mp.target.resize(64);
        for (auto& v : mp.logits) v = rng.normal() * 2.0;
        for (auto& v : mp.target) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        mp.smoothing = 1.0;

        const auto bce_fd = oracles::finite_difference(
            [&](const std::vector<double>& x) {
                MaskPrediction m = mp;
                m.logits = x;
                return bce_mask_loss(m);
            },
            mp.logits, 1e-4);
        const auto bce_an = bce_mask_loss_grad(mp);
        const auto dice_fd = oracles::finite_difference(
            [&](const std::vector<double>& x) {
                MaskPrediction m = mp;
                m.logits = x;
                return dice_loss(m);
            },
            mp.logits, 1e-4);
        const auto dice_an = dice_loss_grad(mp);
        for (size_t i = 0; i < mp.logits.size(); ++i) {
            const double rb_ = std::abs(bce_an[i] - bce_fd[i]) / std::max(1e-6, std::abs(bce_fd[i]));
            const double rd = std::abs(dice_an[i] - dice_fd[i]) / std::max(1e-6, std::abs(dice_fd[i]));
            c.require(rb_ <= 1e-4, "bce gradient rel error " + fmt(rb_));
            c.require(rd <= 1e-4, "dice gradient rel error " + fmt(rd));
        }
    }
}

// ---------------------------------------------------------------------------
// 4. End-to-end tiny run: adapter fine-tuning on procedural lesions, then
//    one-prompt dual generation checked against an intensity-threshold oracle.
// ---------------------------------------------------------------------------

// Desk-scale stand-in for the pretrained checkpoint: the full tiny denoiser is
// trained once on RGB-only procedural lesions (diffusion loss only) and cached.
backbone::CheckpointContents pretrained_tiny_fixture() {
    const fs::path ckpt_dir = g_cache_dir / "tiny-base" / "checkpoint-final";
    if (fs::exists(ckpt_dir / "meta.json")) return backbone::load_checkpoint(ckpt_dir);

    std::cout << "  [4] pretraining the tiny backbone (cached for later runs)..." << std::endl;
    data::ToyDatasetSpec spec;
    spec.count = 200;
    spec.image_size = 32;
    spec.seed = 2000;
    const auto manifest = data::make_toy_dataset(g_cache_dir / "data-pretrain", spec);

    backbone::TinyBackboneConfig bcfg;
    bcfg.pixel_channels = 3;
    bcfg.init_seed = 1234;
    auto bundle = backbone::build_tiny_backbone(bcfg);

    train::TrainConfig cfg;
    cfg.scope = train::TrainScope::full;
    cfg.weights = {1.0, 0.0, 0.0};
    cfg.epochs = 120;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;
    cfg.weight_decay = 0.0;
    cfg.caption_dropout = 0.1;
    cfg.seed = 11;
    cfg.out_dir = g_cache_dir / "tiny-base";
    train::fit(manifest, *bundle, nullptr, diffusion::default_tiny_schedule(), cfg);
    return backbone::load_checkpoint(ckpt_dir);
}

void criterion_4(Check& c) {
    auto pretrained = pretrained_tiny_fixture();
    auto bundle = pretrained.bundle;
    bundle->apply_four_channel_surgery(backbone::InitPolicy::zeros, backbone::InitPolicy::zeros);
    auto adapters = backbone::inject_lora(*bundle, 4, 4.f, 21);

    data::ToyDatasetSpec spec;
    spec.count = 200;
    spec.image_size = 32;
    spec.seed = 1000;
    const auto manifest = data::make_toy_dataset(g_cache_dir / "data-finetune", spec);

    train::TrainConfig cfg;
    cfg.scope = train::TrainScope::adapters;
    cfg.epochs = 30;
    cfg.batch_size = 4;
    cfg.learning_rate = 3e-3;
    cfg.caption_dropout = 0.1;
    cfg.seed = 5;
    cfg.out_dir = g_cache_dir / "tiny-finetune";
    const auto result = train::fit(manifest, *bundle, &adapters, pretrained.schedule, cfg);

    const double first = result.epoch_mean_total.front();
    const double last = result.epoch_mean_total.back();
    c.require(last <= 0.5 * first, "total loss fell only from " + fmt(first) + " to " + fmt(last) +
                                       " (needs >= 50%)");

    // One-prompt dual generation vs the intensity-threshold oracle.
    const auto sched = diffusion::make_schedule(pretrained.schedule);
    gen::GenerationConfig gcfg;
    gcfg.steps = 45;
    gcfg.guidance_scale = 1.22;
    gcfg.resolution = 32;
    gcfg.out_dir = g_cache_dir / "tiny-samples";
    const std::string prompt = captions::build_generation_prompt("lesion");

    double dice_sum = 0.0;
    int oracle_empty = 0;
    for (uint64_t seed = 0; seed < 32; ++seed) {
        const auto pair = gen::generate_pair(prompt, 9000 + seed, gcfg, *bundle, sched);
        const auto lum = luminance(pair.rgb);
        float lo = lum[0], hi = lum[0];
        for (float v : lum) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const float threshold = 0.5f * (lo + hi);
        Mask oracle(pair.rgb.height, pair.rgb.width);
        size_t area = 0;
        for (size_t i = 0; i < lum.size(); ++i) {
            oracle.px[i] = lum[i] >= threshold ? 1 : 0;
            area += oracle.px[i];
        }
        if (area < lum.size() / 100) {  // blob-less output scores zero
            ++oracle_empty;
            continue;
        }
        dice_sum += metrics::dice_iou({pair.mask, oracle}).dice;
    }
    const double mean_dice = dice_sum / 32.0;
    c.require(mean_dice >= 0.6, "mean dual-generation Dice " + fmt(mean_dice) +
                                    " over 32 seeds (needs >= 0.6, " +
                                    std::to_string(oracle_empty) + " blob-less)");
    std::cout << "  [4] loss " << fmt(first) << " -> " << fmt(last) << ", mean dual Dice "
              << fmt(mean_dice) << "\n";
}

// ---------------------------------------------------------------------------
// 5. Metric oracles.
// ---------------------------------------------------------------------------
void criterion_5(Check& c) {
    Rng rng(515151);
    int disagreements = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 2 + static_cast<int>(rng.uniform_int(0, 14));
        const int w = 2 + static_cast<int>(rng.uniform_int(0, 14));
        Mask a(h, w), b(h, w);
        const double da = 0.15 + rng.uniform() * 0.5, db = 0.15 + rng.uniform() * 0.5;
        for (auto& v : a.px) v = rng.uniform() < da ? 1 : 0;
        for (auto& v : b.px) v = rng.uniform() < db ? 1 : 0;

        double od, oi;
        oracles::dice_iou_bruteforce(a, b, &od, &oi);
        const auto ov = metrics::dice_iou({a, b});
        if (std::abs(ov.dice - od) > 1e-9 || std::abs(ov.iou - oi) > 1e-9) ++disagreements;

        double oa, oh;
        if (oracles::asd_bruteforce(a, b, &oa)) {
            oracles::hausdorff_bruteforce(a, b, &oh);
            if (std::abs(metrics::asd({a, b}) - oa) > 1e-9) ++disagreements;
            if (std::abs(metrics::hausdorff({a, b}) - oh) > 1e-9) ++disagreements;
        }
    }
    c.require(disagreements == 0,
              std::to_string(disagreements) + " oracle disagreements over 1000 pairs");

    Mask p(8, 8), q(8, 8);
    p.at(0, 0) = 1;
    q.at(3, 4) = 1;
    const double hd = metrics::hausdorff({p, q});
    c.require(std::abs(hd - 5.0) <= 1e-12, "hausdorff((0,0),(3,4)) = " + fmt(hd));

    // Frechet special case: equal covariances, mean offset delta.
    std::vector<std::vector<double>> feats;
    Rng fr(99);
    for (int i = 0; i < 30; ++i) {
        std::vector<double> f(5);
        for (auto& v : f) v = fr.normal();
        feats.push_back(f);
    }
    const auto stats = metrics::compute_feature_stats(feats);
    auto shifted = stats;
    const std::vector<double> delta{0.3, -0.7, 1.1, 0.0, 2.0};
    double norm2 = 0;
    for (size_t i = 0; i < delta.size(); ++i) {
        shifted.mean[i] += delta[i];
        norm2 += delta[i] * delta[i];
    }
    const double fd = metrics::frechet_distance(stats, shifted);
    c.require(std::abs(fd - norm2) <= 1e-6,
              "frechet mean-offset case " + fmt(fd) + " vs " + fmt(norm2));

    ImageF img(3, 48, 48);
    Rng ir(7);
    for (auto& v : img.px) v = static_cast<float>(ir.uniform());
    c.require(std::abs(metrics::ms_ssim(img, img, 2) - 1.0) <= 1e-12, "ms_ssim(x,x) != 1");
    c.require(metrics::lpips(img, img, metrics::make_identity_perceptual_extractor()) == 0.0,
              "lpips(x,x) != 0");
}

// ---------------------------------------------------------------------------
// 6. Classification report hand-derived values.
// ---------------------------------------------------------------------------
void criterion_6(Check& c) {
    metrics::ConfusionMatrix cm(2);
    cm.at(0, 0) = 1;
    cm.at(0, 1) = 1;
    cm.at(1, 0) = 0;
    cm.at(1, 1) = 2;
    const auto r = metrics::classification_report(cm);
    c.require(std::abs(r.accuracy - 0.75) <= 1e-12, "accuracy " + fmt(r.accuracy));
    c.require(std::abs(r.macro_sensitivity - 0.75) <= 1e-12,
              "macro sensitivity " + fmt(r.macro_sensitivity));
    c.require(std::abs(r.macro_precision - 0.8333333333) <= 1e-4,
              "macro precision " + fmt(r.macro_precision));
    c.require(std::abs(r.macro_f1 - 0.7333333333) <= 1e-4, "macro F1 " + fmt(r.macro_f1));
}

// ---------------------------------------------------------------------------
// 7. Protocol fidelity: stratified folds, hybrid composition, leak audit.
// ---------------------------------------------------------------------------
data::DatasetManifest fabricated_manifest(const std::vector<std::pair<std::string, size_t>>& counts,
                                          data::Source source) {
    data::DatasetManifest m;
    m.root = "";
    size_t i = 0;
    for (const auto& [cls, n] : counts) {
        m.label_set.push_back(cls);
        for (size_t j = 0; j < n; ++j, ++i)
            m.records.push_back({"img_" + std::to_string(i) + ".png",
                                 "msk_" + std::to_string(i) + ".png", "", cls, source});
    }
    return m;
}

void criterion_7(Check& c) {
    // 5-fold on 100 samples, two classes of 50: every fold validates 10+10.
    const auto m = fabricated_manifest({{"a", 50}, {"b", 50}}, data::Source::real);
    const auto folds = data::stratified_kfold(m, 5, 3);
    for (const auto& fold : folds) {
        const auto hist = data::class_histogram(fold.validation);
        c.require(hist.at("a") == 10 && hist.at("b") == 10,
                  "fold validation histogram is not 10+10");
        c.require(fold.train.records.size() == 80, "fold train size is not 80");
    }

    // Seven-category manifests sized like the paper's hybrid configuration.
    std::vector<std::pair<std::string, size_t>> seven;
    const char* cats[7] = {"mel", "nv", "bcc", "akiec", "bkl", "df", "vasc"};
    for (const auto* cat : cats) seven.push_back({cat, 130});  // 910 per source
    const auto real = fabricated_manifest(seven, data::Source::real);
    const auto synth = fabricated_manifest(seven, data::Source::synthetic);
    const auto hybrid = data::assemble_hybrid(real, synth, {0.5, 1640, {}}, 9);
    size_t n_real = 0, n_synth = 0;
    for (const auto& r : hybrid.records) (r.source == data::Source::real ? n_real : n_synth)++;
    c.require(n_real == 820, "hybrid real count " + std::to_string(n_real) + " != 820");
    c.require(n_synth == 820, "hybrid synth count " + std::to_string(n_synth) + " != 820");

    // A 1,990-record seven-category manifest loads with all records intact.
    {
        const fs::path dir = g_cache_dir / "manifest-1990";
        data::ToyDatasetSpec tiles;
        tiles.count = 14;
        tiles.image_size = 16;
        tiles.seed = 3;
        const auto pool = data::make_toy_dataset(dir, tiles);
        data::DatasetManifest big;
        big.root = pool.root;
        for (const auto* cat : cats) big.label_set.push_back(cat);
        for (size_t i = 0; i < 1990; ++i) {
            auto rec = pool.records[i % pool.records.size()];
            rec.category = cats[i % 7];
            big.records.push_back(rec);
        }
        data::save_manifest(dir / "big.json", big);
        const auto loaded = data::load_manifest(dir / "big.json");
        c.require(loaded.records.size() == 1990, "1,990-record manifest loaded " +
                                                     std::to_string(loaded.records.size()));
        const auto hist = data::class_histogram(loaded);
        c.require(hist.size() == 7, "histogram bins != 7");
        size_t total = 0;
        for (const auto& [k, v] : hist) total += v;
        c.require(total == 1990, "histogram total != 1990");
    }

    // Harness run: the train/validation identifier intersection is empty in
    // every fold (re-derived here, independently of the built-in audit).
    data::ToyDatasetSpec spec;
    spec.count = 24;
    spec.categories = {"round", "elongated"};
    spec.seed = 31;
    const auto toy = data::make_toy_dataset(g_cache_dir / "data-harness", spec);
    auto cfg = harness::ExperimentConfig::classification_defaults();
    cfg.input_size = 32;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.folds = 3;
    const auto run = harness::run_classification(cfg, toy, nullptr);
    c.require(run.report.rows.size() == 1, "harness report missing rows");
    for (const auto& fold : data::stratified_kfold(toy, cfg.folds, cfg.seed)) {
        std::set<std::string> train_ids;
        for (const auto& r : fold.train.records) train_ids.insert(r.image);
        for (const auto& r : fold.validation.records)
            c.require(!train_ids.count(r.image), "fold leak: " + r.image);
    }
}

// ---------------------------------------------------------------------------
// 8. Determinism: CLI generation byte-identity and training resume.
// ---------------------------------------------------------------------------
void criterion_8(Check& c) {
    // generate twice with a fixed seed: byte-identical PNGs.
    const fs::path ckpt = g_cache_dir / "det-ckpt";
    backbone::TinyBackboneConfig bcfg;
    bcfg.pixel_channels = 4;
    auto bundle = backbone::build_tiny_backbone(bcfg);
    backbone::save_checkpoint(ckpt, *bundle, nullptr, diffusion::default_tiny_schedule());

    const fs::path g1 = g_cache_dir / "det-gen-1";
    const fs::path g2 = g_cache_dir / "det-gen-2";
    fs::remove_all(g1);
    fs::remove_all(g2);
    if (!g_cli_path.empty()) {
        const std::string common = "generate --checkpoint " + ckpt.string() +
                                   " --class lesion --count 2 --steps 5 --guidance 1.22 "
                                   "--resolution 32 --seed 77 --out ";
        c.require(run_cli(common + g1.string()) == 0, "first generate invocation failed");
        c.require(run_cli(common + g2.string()) == 0, "second generate invocation failed");
    } else {
        gen::GenerationConfig gcfg;
        gcfg.steps = 5;
        gcfg.resolution = 32;
        gcfg.seed = 77;
        const auto sched = diffusion::make_schedule(diffusion::default_tiny_schedule());
        gcfg.out_dir = g1;
        gen::batch_generate({{"lesion", 2}}, gcfg, *bundle, sched);
        gcfg.out_dir = g2;
        gen::batch_generate({{"lesion", 2}}, gcfg, *bundle, sched);
    }
    const auto m1 = data::load_manifest(g1 / "manifest.json");
    for (const auto& r : m1.records) {
        c.require(file_bytes(g1 / r.image) == file_bytes(g2 / r.image),
                  "image bytes differ: " + r.image);
        c.require(file_bytes(g1 / r.mask) == file_bytes(g2 / r.mask),
                  "mask bytes differ: " + r.mask);
    }

    // Training resume reproduces the uninterrupted per-step losses.
    data::ToyDatasetSpec spec;
    spec.count = 8;
    spec.seed = 6;
    const auto manifest = data::make_toy_dataset(g_cache_dir / "data-resume", spec);
    const auto sched_cfg = diffusion::default_tiny_schedule();
    auto make_bundle = [] {
        backbone::TinyBackboneConfig bc;
        bc.pixel_channels = 3;
        bc.init_seed = 2024;
        auto b = backbone::build_tiny_backbone(bc);
        b->apply_four_channel_surgery(backbone::InitPolicy::zeros, backbone::InitPolicy::zeros);
        return b;
    };
    train::TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.seed = 99;
    cfg.learning_rate = 1e-3;

    auto b1 = make_bundle();
    auto a1 = backbone::inject_lora(*b1, 4, 4.f, 10);
    cfg.out_dir = g_cache_dir / "resume-full";
    const auto full = train::fit(manifest, *b1, &a1, sched_cfg, cfg);

    auto b2 = make_bundle();
    auto a2 = backbone::inject_lora(*b2, 4, 4.f, 10);
    train::TrainConfig cfg_a = cfg;
    cfg_a.epochs = 2;
    cfg_a.out_dir = g_cache_dir / "resume-part1";
    const auto part1 = train::fit(manifest, *b2, &a2, sched_cfg, cfg_a);

    auto resumed = backbone::load_checkpoint(part1.checkpoint_dir);
    train::TrainConfig cfg_b = cfg;
    cfg_b.out_dir = g_cache_dir / "resume-part2";
    cfg_b.resume_from = part1.checkpoint_dir;
    const auto part2 = train::fit(manifest, *resumed.bundle, &resumed.adapters, sched_cfg, cfg_b);

    c.require(full.steps.size() == 8 && part2.steps.size() == 4, "unexpected step counts");
    for (size_t i = 0; i < part2.steps.size() && i + 4 < full.steps.size(); ++i)
        c.require(std::abs(part2.steps[i].l_total - full.steps[4 + i].l_total) <= 1e-12,
                  "resumed step " + std::to_string(i) + " loss differs");
}

// ---------------------------------------------------------------------------
// 9. Report shapes against the golden schemas, via the CLI pipelines.
// ---------------------------------------------------------------------------
void criterion_9(Check& c) {
    auto schema = [&](const std::string& name) {
        std::ifstream in(g_golden_dir / name);
        if (!in) throw IoError("missing golden schema " + name);
        return nlohmann::json::parse(in);
    };
    auto validate = [&](const fs::path& report_json, const std::string& schema_name) {
        std::ifstream in(report_json);
        if (!in) {
            c.require(false, "missing report " + report_json.string());
            return;
        }
        const auto report = nlohmann::json::parse(in);
        std::string why;
        c.require(metrics::validate_report_schema(report, schema(schema_name), &why),
                  schema_name + ": " + why);
    };

    data::ToyDatasetSpec spec;
    spec.count = 24;
    spec.categories = {"round", "elongated"};
    spec.seed = 31;
    const auto real_dir = g_cache_dir / "rep-real";
    const auto synth_dir = g_cache_dir / "rep-synth";
    data::make_toy_dataset(real_dir, spec);
    spec.seed = 77;
    data::make_toy_dataset(synth_dir, spec);

    if (!g_cli_path.empty()) {
        const std::string real_m = (real_dir / "manifest.json").string();
        const std::string synth_m = (synth_dir / "manifest.json").string();
        const fs::path eg = g_cache_dir / "rep-evalgen";
        const fs::path cls = g_cache_dir / "rep-cls";
        const fs::path seg = g_cache_dir / "rep-seg";
        const fs::path robc = g_cache_dir / "rep-robust-cls";
        const fs::path robs = g_cache_dir / "rep-robust-seg";
        for (const auto& d : {eg, cls, seg, robc, robs}) fs::remove_all(d);

        c.require(run_cli("evaluate-gen --real " + real_m + " --synth " + synth_m +
                          " --eval-size 64 --ms-scales 2 --out " + eg.string()) == 0,
                  "evaluate-gen failed");
        validate(eg / "report.json", "table1_generation_quality.json");

        c.require(run_cli("train-cls --real " + real_m + " --condition real --input-size 32 "
                          "--batch 8 --epochs 1 --folds 3 --out " + cls.string()) == 0,
                  "train-cls failed");
        validate(cls / "report.json", "table2_classification.json");

        c.require(run_cli("train-seg --real " + real_m + " --condition real --input-size 32 "
                          "--batch 8 --epochs 1 --folds 3 --out " + seg.string()) == 0,
                  "train-seg failed");
        validate(seg / "report.json", "table2_segmentation.json");

        c.require(run_cli("eval-robust --experiment " + cls.string() + " --external " + real_m +
                          " --out " + robc.string()) == 0,
                  "eval-robust (classification) failed");
        validate(robc / "report.json", "table3_robustness_classification.json");

        c.require(run_cli("eval-robust --experiment " + seg.string() + " --external " + real_m +
                          " --out " + robs.string()) == 0,
                  "eval-robust (segmentation) failed");
        validate(robs / "report.json", "table3_robustness_segmentation.json");

        // CLI dispatch contract.
        c.require(run_cli("--help") == 0, "--help should exit 0");
        c.require(run_cli("no-such-command") == 2, "unknown subcommand should exit 2");
        c.require(run_cli("generate --checkpoint nowhere --class x --steps 0 --out " +
                          (g_cache_dir / "rep-bad").string()) == 1,
                  "invalid generate arguments should exit 1");
    } else {
        c.require(false, "CLI path not provided (--cli)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--cache-dir") g_cache_dir = argv[i + 1];
        else if (flag == "--golden-dir") g_golden_dir = argv[i + 1];
        else if (flag == "--cli") g_cli_path = argv[i + 1];
    }
    fs::create_directories(g_cache_dir);

    struct Criterion {
        int id;
        const char* name;
        std::function<void(Check&)> run;
    };
    const std::vector<Criterion> criteria{
        {1, "diffusion math (forward equivalence, exact inversion)", criterion_1},
        {2, "surgery equivalence and adapter transparency", criterion_2},
        {3, "loss values and finite-difference gradients", criterion_3},
        {4, "end-to-end tiny run (fit + dual generation)", criterion_4},
        {5, "metric oracles (overlap, surface distances, FID, SSIM)", criterion_5},
        {6, "classification report hand-derived values", criterion_6},
        {7, "protocol fidelity (folds, hybrid counts, leak audit)", criterion_7},
        {8, "determinism (generation bytes, training resume)", criterion_8},
        {9, "report shapes vs golden schemas via the CLI", criterion_9},
    };

    int failed = 0;
    for (const auto& criterion : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char line[256];
        std::snprintf(line, sizeof(line), "[%d] %-58s %s (%.1fs)", criterion.id, criterion.name,
                      check.failures.empty() ? "PASS" : "FAIL", secs);
        std::cout << line << "\n";
        if (!check.failures.empty()) {
            ++failed;
            size_t shown = 0;
            for (const auto& f : check.failures) {
                std::cout << "      - " << f << "\n";
                if (++shown == 8) {
                    std::cout << "      - (" << check.failures.size() - shown << " more)\n";
                    break;
                }
            }
        }
    }
    std::cout << "ACCEPTANCE: " << (criteria.size() - failed) << "/" << criteria.size()
              << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
