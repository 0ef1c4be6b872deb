// lesiongen CLI: one-prompt dual generation of skin-lesion images and masks,
// fine-tuning, and the downstream evaluation pipeline.
//
// Subcommands: enrich, finetune, generate, evaluate-gen, train-cls, train-seg,
// eval-robust, report. Run with --help for options. Exit codes: 0 success,
// 1 validation/runtime error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "lesiongen/backbone/checkpoint.hpp"
#include "lesiongen/captions/client.hpp"
#include "lesiongen/captions/prompts.hpp"
#include "lesiongen/cli/runstamp.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/data/split.hpp"
#include "lesiongen/data/toy.hpp"
#include "lesiongen/gen/generate.hpp"
#include "lesiongen/harness/experiment.hpp"
#include "lesiongen/metrics/features.hpp"
#include "lesiongen/metrics/perceptual.hpp"
#include "lesiongen/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace lesiongen;

namespace {

nlohmann::json resolved_options(const CLI::App& app) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto* opt : app.get_options()) {
        if (opt->get_name().rfind("--", 0) != 0) continue;
        const auto results = opt->results();
        if (results.empty()) continue;
        if (results.size() == 1) out[opt->get_name().substr(2)] = results.front();
        else out[opt->get_name().substr(2)] = results;
    }
    return out;
}

struct EnrichArgs {
    std::string manifest;
    std::string out;
    captions::LlmClientConfig client;
    bool fallback = false;
};

int cmd_enrich(const EnrichArgs& a, const CLI::App& app) {
    auto manifest = data::load_manifest(a.manifest);
    const auto captions_list = captions::enrich_manifest(manifest, a.client, a.fallback);
    for (size_t i = 0; i < manifest.records.size(); ++i)
        manifest.records[i].caption = captions_list[i];
    fs::create_directories(a.out);
    data::save_manifest(fs::path(a.out) / "manifest.json", manifest);
    auto stamp = cli::make_runstamp("enrich", resolved_options(app), 0);
    stamp.add_input(a.manifest);
    stamp.write(a.out);
    std::cout << "enriched " << manifest.records.size() << " captions -> " << a.out << "\n";
    return 0;
}

struct FinetuneArgs {
    std::string manifest;
    std::string out = "finetune-out";
    std::string backbone = "tiny";
    std::string scope = "adapters";
    std::string surgery = "auto";  // auto|zeros|mean_of_rgb|off
    int rank = 4;
    double alpha = 4.0;
    train::TrainConfig train;
    diffusion::ScheduleConfig schedule = diffusion::default_tiny_schedule();
    backbone::TinyBackboneConfig tiny;
    bool schedule_given = false;
};

int cmd_finetune(FinetuneArgs& a, const CLI::App& app) {
    const auto manifest = data::load_manifest(a.manifest);

    std::shared_ptr<backbone::TinyBackbone> bundle;
    backbone::LoraAdapterSet adapters;
    diffusion::ScheduleConfig sched = a.schedule;

    if (a.backbone == "tiny") {
        a.tiny.pixel_channels = a.scope == "full" ? 3 : 4;
        bundle = backbone::build_tiny_backbone(a.tiny);
    } else {
        auto loaded = backbone::load_checkpoint(a.backbone);
        bundle = loaded.bundle;
        adapters = loaded.adapters;
        if (!a.schedule_given) sched = loaded.schedule;
    }

    if (a.surgery != "off" && bundle->pixel_channels() == 3 && a.scope == "adapters") {
        const auto policy = a.surgery == "auto" ? backbone::InitPolicy::zeros
                                                : backbone::init_policy_from_string(a.surgery);
        bundle->apply_four_channel_surgery(policy, policy);
        std::cout << "applied four-channel surgery (policy "
                  << backbone::to_string(policy) << ")\n";
    }
    if (a.scope == "adapters" && adapters.entries.empty())
        adapters = backbone::inject_lora(*bundle, a.rank, static_cast<float>(a.alpha),
                                         a.train.seed);

    a.train.scope = a.scope == "full" ? train::TrainScope::full : train::TrainScope::adapters;
    a.train.out_dir = a.out;
    if (a.scope == "full") a.train.weights = {1.0, 0.0, 0.0};

    auto stamp = cli::make_runstamp("finetune", resolved_options(app), a.train.seed);
    stamp.add_input(a.manifest);
    stamp.write(a.out);

    const auto result = train::fit(manifest, *bundle,
                                   adapters.entries.empty() ? nullptr : &adapters, sched, a.train);
    std::cout << "checkpoint: " << result.checkpoint_dir.string() << "\n"
              << "curve: " << result.curve_csv.string() << "\n"
              << "final epoch mean total loss: " << result.epoch_mean_total.back() << "\n";
    return 0;
}

struct GenerateArgs {
    std::string checkpoint;
    std::vector<std::string> classes;
    size_t count = 1;
    gen::GenerationConfig cfg;
};

int cmd_generate(GenerateArgs& a, const CLI::App& app) {
    auto loaded = backbone::load_checkpoint(a.checkpoint);
    const auto sched = diffusion::make_schedule(loaded.schedule);
    if (a.cfg.resolution != loaded.bundle->config().image_size)
        std::cerr << "note: generating at " << a.cfg.resolution
                  << " while the checkpoint was trained at "
                  << loaded.bundle->config().image_size
                  << "; adapters are reused across resolutions\n";

    std::map<std::string, size_t> plan;
    for (const auto& c : a.classes) plan[c] = a.count;
    auto stamp = cli::make_runstamp("generate", resolved_options(app), a.cfg.seed);
    stamp.write(a.cfg.out_dir);
    const auto manifest = gen::batch_generate(plan, a.cfg, *loaded.bundle, sched);
    std::cout << "wrote " << manifest.records.size() << " image/mask pairs to "
              << a.cfg.out_dir.string() << "\n";
    return 0;
}

struct EvalGenArgs {
    std::string real;
    std::string synth;
    std::string out = "evaluate-gen-out";
    std::string extractor = "random_proj";
    int side = 8;
    int dim = 24;
    int eval_size = 64;
    int ms_scales = 2;
    uint64_t seed = 0;
};

int cmd_evaluate_gen(const EvalGenArgs& a, const CLI::App& app) {
    const auto real = data::load_manifest(a.real);
    const auto synth = data::load_manifest(a.synth);

    auto load_images = [&](const data::DatasetManifest& m) {
        std::vector<ImageF> out;
        for (const auto& r : m.records)
            out.push_back(resize_lanczos(data::load_sample(m, r).rgb, a.eval_size, a.eval_size));
        return out;
    };
    const auto imgs_a = load_images(real);
    const auto imgs_b = load_images(synth);

    const auto extractor = a.extractor == "pixel"
                               ? metrics::make_pixel_extractor(a.side)
                               : metrics::make_random_projection_extractor(a.dim, a.side, 1234);
    const double fid = metrics::frechet_distance(metrics::compute_feature_stats(imgs_a, extractor),
                                                 metrics::compute_feature_stats(imgs_b, extractor));

    // LPIPS / MS-SSIM over a seeded random matching of the two sets.
    const size_t pairs = std::min(imgs_a.size(), imgs_b.size());
    std::vector<size_t> ia(imgs_a.size()), ib(imgs_b.size());
    for (size_t i = 0; i < ia.size(); ++i) ia[i] = i;
    for (size_t i = 0; i < ib.size(); ++i) ib[i] = i;
    Rng rng(mix_seed(a.seed, 0xe7a1));
    rng.shuffle(ia);
    rng.shuffle(ib);
    const auto perceptual = metrics::make_identity_perceptual_extractor();
    double lp = 0, ms = 0;
    for (size_t i = 0; i < pairs; ++i) {
        lp += metrics::lpips(imgs_a[ia[i]], imgs_b[ib[i]], perceptual);
        ms += metrics::ms_ssim(imgs_a[ia[i]], imgs_b[ib[i]], a.ms_scales);
    }
    lp /= static_cast<double>(pairs);
    ms /= static_cast<double>(pairs);

    metrics::MetricReport report;
    report.task = "generation-quality";
    report.columns = {"FID", "LPIPS", "MS-SSIM"};
    metrics::ReportRow row;
    row.id = "real-vs-synth";
    row.values.emplace_back("FID", metrics::MetricValue{fid, true, 0, 0, false});
    row.values.emplace_back("LPIPS", metrics::MetricValue{lp, true, 0, 0, false});
    row.values.emplace_back("MS-SSIM", metrics::MetricValue{ms, true, 0, 0, false});
    report.rows.push_back(row);
    report.dataset_ids = {{"real", a.real}, {"synth", a.synth}};
    report.config = resolved_options(app);

    fs::create_directories(a.out);
    report.save(fs::path(a.out) / "report");
    auto stamp = cli::make_runstamp("evaluate-gen", resolved_options(app), a.seed);
    stamp.add_input(a.real);
    stamp.add_input(a.synth);
    stamp.write(a.out);
    std::cout << report.to_csv();
    return 0;
}

struct TrainDownstreamArgs {
    std::string real;
    std::string synth;
    std::string condition = "hybrid";
    std::string out;
    harness::ExperimentConfig cfg;
};

int cmd_train_downstream(TrainDownstreamArgs& a, const CLI::App& app, harness::Task task) {
    a.cfg.task = task;
    a.cfg.condition = harness::condition_from_string(a.condition);
    const auto real = data::load_manifest(a.real);
    std::optional<data::DatasetManifest> synth;
    if (!a.synth.empty()) synth = data::load_manifest(a.synth);

    const auto run = task == harness::Task::classification
                         ? harness::run_classification(a.cfg, real, synth ? &*synth : nullptr)
                         : harness::run_segmentation(a.cfg, real, synth ? &*synth : nullptr);
    fs::create_directories(a.out);
    harness::save_experiment(run, a.out);
    auto stamp = cli::make_runstamp(task == harness::Task::classification ? "train-cls" : "train-seg",
                                    resolved_options(app), a.cfg.seed);
    stamp.add_input(a.real);
    if (!a.synth.empty()) stamp.add_input(a.synth);
    stamp.write(a.out);
    std::cout << run.report.to_csv();
    return 0;
}

struct EvalRobustArgs {
    std::string experiment;
    std::string external;
    std::string mapping;
    std::string out = "eval-robust-out";
};

int cmd_eval_robust(const EvalRobustArgs& a, const CLI::App& app) {
    const auto run = harness::load_experiment(a.experiment);
    const auto external = data::load_manifest(a.external);
    std::map<std::string, std::string> mapping;
    if (!a.mapping.empty()) {
        std::ifstream in(a.mapping);
        if (!in) throw IoError("cannot read mapping file " + a.mapping);
        mapping = nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
    }
    const auto report = harness::run_robustness(run, external, mapping);
    fs::create_directories(a.out);
    report.save(fs::path(a.out) / "report");
    auto stamp = cli::make_runstamp("eval-robust", resolved_options(app), run.config.seed);
    stamp.add_input(a.external);
    stamp.write(a.out);
    std::cout << report.to_csv();
    return 0;
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<metrics::MetricReport> reports;
    for (const auto& path : a.inputs) reports.push_back(metrics::MetricReport::load(path));
    std::string rendered;
    if (reports.size() == 1) {
        rendered = reports.front().to_csv();
    } else {
        rendered = harness::compare_conditions(reports).markdown;
    }
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        std::ofstream f(fs::path(a.out) / "comparison.md");
        f << rendered;
    }
    std::cout << rendered;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-prompt dual generation of lesion images and masks, with the full "
                 "fine-tuning and downstream evaluation pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags win");

    // enrich
    EnrichArgs en;
    auto* enrich = app.add_subcommand("enrich", "enrich manifest captions via an LLM endpoint");
    enrich->add_option("--manifest", en.manifest, "dataset manifest JSON")->required();
    enrich->add_option("--out", en.out, "output directory")->required();
    enrich->add_option("--endpoint", en.client.endpoint, "http(s)://host:port");
    enrich->add_option("--path", en.client.path, "endpoint path");
    enrich->add_option("--model", en.client.model, "model name");
    enrich->add_option("--auth-env", en.client.auth_env, "env var holding the bearer token");
    enrich->add_option("--timeout", en.client.timeout_seconds, "request timeout seconds");
    enrich->add_option("--retries", en.client.max_retries, "max retries");
    enrich->add_option("--cache-dir", en.client.cache_dir, "caption cache directory");
    enrich->add_option("--max-concurrency", en.client.max_concurrency, "in-flight request bound");
    enrich->add_flag("--fallback-template,!--no-fallback-template", en.fallback,
                     "fall back to the template caption on failure");
    enrich->add_flag("--send-image,!--no-send-image", en.client.send_image,
                     "attach the image as a data URL (vision mode)");

    // finetune
    FinetuneArgs ft;
    auto* finetune = app.add_subcommand("finetune", "fine-tune the dual-generation backbone");
    finetune->add_option("--manifest", ft.manifest, "training manifest")->required();
    finetune->add_option("--out", ft.out, "output directory");
    finetune->add_option("--backbone", ft.backbone, "tiny | checkpoint directory");
    finetune->add_option("--scope", ft.scope, "adapters | full (full: desk-scale pretraining)")
        ->check(CLI::IsMember({"adapters", "full"}));
    finetune->add_option("--surgery", ft.surgery, "auto | zeros | mean_of_rgb | off");
    finetune->add_option("--rank", ft.rank, "LoRA rank");
    finetune->add_option("--alpha", ft.alpha, "LoRA alpha");
    finetune->add_option("--epochs", ft.train.epochs, "training epochs");
    finetune->add_option("--batch", ft.train.batch_size, "batch size");
    finetune->add_option("--lr", ft.train.learning_rate, "learning rate");
    finetune->add_option("--caption-dropout", ft.train.caption_dropout,
                         "probability of training on the null embedding");
    finetune->add_option("--image-size", ft.train.image_size, "training resolution");
    finetune->add_option("--seed", ft.train.seed, "seed");
    finetune->add_option("--checkpoint-every", ft.train.checkpoint_every_epochs,
                         "checkpoint cadence in epochs (0: final only)");
    finetune->add_option("--resume", ft.train.resume_from,
                         "checkpoint directory holding optimizer state to resume from");
    finetune->add_option("--lambda-diffusion", ft.train.weights.lambda_diffusion, "loss weight");
    finetune->add_option("--lambda-mask", ft.train.weights.lambda_mask, "loss weight");
    finetune->add_option("--lambda-dice", ft.train.weights.lambda_dice, "loss weight");
    auto* sk = finetune->add_option_function<std::string>(
        "--schedule",
        [&ft](const std::string& s) {
            ft.schedule.kind = diffusion::schedule_kind_from_string(s);
            ft.schedule_given = true;
        },
        "linear | scaled_linear");
    (void)sk;
    finetune->add_option("--timesteps", ft.schedule.T, "diffusion steps T");
    finetune->add_option("--beta-start", ft.schedule.beta_start, "schedule start");
    finetune->add_option("--beta-end", ft.schedule.beta_end, "schedule end");
    finetune->add_option("--tiny-width", ft.tiny.width, "tiny denoiser channels");
    finetune->add_option("--tiny-downsample", ft.tiny.downsample, "tiny codec factor");
    finetune->add_option("--tiny-image-size", ft.tiny.image_size, "tiny nominal image size");
    finetune->add_option("--tiny-init-seed", ft.tiny.init_seed, "tiny weight init seed");

    // generate
    GenerateArgs gn;
    auto* generate = app.add_subcommand("generate", "one-prompt dual generation to PNG pairs");
    generate->add_option("--checkpoint", gn.checkpoint, "fine-tuned checkpoint directory")
        ->required();
    generate->add_option("--class", gn.classes, "category name (repeatable)")->required();
    generate->add_option("--count", gn.count, "pairs per category");
    generate->add_option("--steps", gn.cfg.steps, "DDIM steps");
    generate->add_option("--guidance", gn.cfg.guidance_scale, "classifier-free guidance scale");
    generate->add_option("--resolution", gn.cfg.resolution, "output resolution");
    generate->add_option("--eta", gn.cfg.eta, "DDIM eta (0: deterministic)");
    generate->add_option("--seed", gn.cfg.seed, "base seed");
    generate->add_option("--workers", gn.cfg.workers, "parallel workers");
    generate->add_option("--out", gn.cfg.out_dir, "output directory")->required();

    // evaluate-gen
    EvalGenArgs eg;
    auto* evalgen = app.add_subcommand("evaluate-gen", "FID/LPIPS/MS-SSIM between two datasets");
    evalgen->add_option("--real", eg.real, "real manifest")->required();
    evalgen->add_option("--synth", eg.synth, "synthetic manifest")->required();
    evalgen->add_option("--out", eg.out, "output directory");
    evalgen->add_option("--extractor", eg.extractor, "pixel | random_proj")
        ->check(CLI::IsMember({"pixel", "random_proj"}));
    evalgen->add_option("--side", eg.side, "extractor downsample side");
    evalgen->add_option("--dim", eg.dim, "random projection width");
    evalgen->add_option("--eval-size", eg.eval_size, "common evaluation resolution");
    evalgen->add_option("--ms-scales", eg.ms_scales, "MS-SSIM scales");
    evalgen->add_option("--seed", eg.seed, "pair-matching seed");

    // train-cls / train-seg
    TrainDownstreamArgs tc;
    tc.cfg = harness::ExperimentConfig::classification_defaults();
    tc.out = "train-cls-out";
    auto* traincls = app.add_subcommand("train-cls", "downstream classification protocol");
    TrainDownstreamArgs ts;
    ts.cfg = harness::ExperimentConfig::segmentation_defaults();
    ts.out = "train-seg-out";
    auto* trainseg = app.add_subcommand("train-seg", "downstream segmentation protocol");
    for (auto [cmd, args] : {std::pair{traincls, &tc}, std::pair{trainseg, &ts}}) {
        cmd->add_option("--real", args->real, "real manifest")->required();
        cmd->add_option("--synth", args->synth, "synthetic manifest");
        cmd->add_option("--condition", args->condition, "real | synth | hybrid");
        cmd->add_option("--arch", args->cfg.architecture, "registry architecture");
        cmd->add_option("--input-size", args->cfg.input_size, "input resolution");
        cmd->add_option("--batch", args->cfg.batch_size, "batch size");
        cmd->add_option("--epochs", args->cfg.epochs, "epochs");
        cmd->add_option("--lr", args->cfg.learning_rate, "learning rate");
        cmd->add_option("--folds", args->cfg.folds, "stratified folds");
        cmd->add_option("--seed", args->cfg.seed, "seed");
        cmd->add_option("--out", args->out, "output directory");
    }

    // eval-robust
    EvalRobustArgs er;
    auto* evalrobust = app.add_subcommand("eval-robust",
                                          "evaluate trained models on an external dataset");
    evalrobust->add_option("--experiment", er.experiment, "train-cls/train-seg output directory")
        ->required();
    evalrobust->add_option("--external", er.external, "external manifest")->required();
    evalrobust->add_option("--mapping", er.mapping,
                           "JSON map of external category -> trained category");
    evalrobust->add_option("--out", er.out, "output directory");

    // report
    ReportArgs rp;
    auto* report = app.add_subcommand("report", "render or compare metric reports");
    report->add_option("--input", rp.inputs, "report JSON files")->required();
    report->add_option("--out", rp.out, "output directory for the rendered table");

    // make-toy-data (fixture helper for walkthroughs and desk-scale runs)
    std::string toy_out = "toy-data";
    data::ToyDatasetSpec toy_spec;
    std::vector<std::string> toy_cats;
    auto* maketoy =
        app.add_subcommand("make-toy-data", "write a procedural ellipse dataset + manifest");
    maketoy->add_option("--out", toy_out, "output directory");
    maketoy->add_option("--count", toy_spec.count, "sample count");
    maketoy->add_option("--image-size", toy_spec.image_size, "image side");
    maketoy->add_option("--seed", toy_spec.seed, "seed");
    maketoy->add_option("--category", toy_cats, "category names (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, returns 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (enrich->parsed()) return cmd_enrich(en, *enrich);
        if (finetune->parsed()) return cmd_finetune(ft, *finetune);
        if (generate->parsed()) return cmd_generate(gn, *generate);
        if (evalgen->parsed()) return cmd_evaluate_gen(eg, *evalgen);
        if (traincls->parsed())
            return cmd_train_downstream(tc, *traincls, harness::Task::classification);
        if (trainseg->parsed())
            return cmd_train_downstream(ts, *trainseg, harness::Task::segmentation);
        if (evalrobust->parsed()) return cmd_eval_robust(er, *evalrobust);
        if (report->parsed()) return cmd_report(rp);
        if (maketoy->parsed()) {
            if (!toy_cats.empty()) toy_spec.categories = toy_cats;
            const auto m = data::make_toy_dataset(toy_out, toy_spec);
            std::cout << "wrote " << m.records.size() << " samples to " << toy_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
