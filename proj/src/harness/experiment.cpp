#include "lesiongen/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "lesiongen/core/array_store.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"
#include "lesiongen/metrics/classification.hpp"
#include "lesiongen/metrics/segmentation.hpp"

namespace lesiongen::harness {

namespace fs = std::filesystem;

Condition condition_from_string(const std::string& s) {
    if (s == "real") return Condition::real;
    if (s == "synth") return Condition::synth;
    if (s == "hybrid") return Condition::hybrid;
    throw ArgumentError("unknown condition: " + s + " (expected real|synth|hybrid)");
}

std::string to_string(Condition c) {
    switch (c) {
        case Condition::real: return "real";
        case Condition::synth: return "synth";
        default: return "hybrid";
    }
}

ExperimentConfig ExperimentConfig::classification_defaults() {
    ExperimentConfig cfg;
    cfg.task = Task::classification;
    cfg.architecture = "tiny_cnn";
    cfg.input_size = 224;
    cfg.batch_size = 32;
    cfg.epochs = 50;
    cfg.learning_rate = 1e-4;
    return cfg;
}

ExperimentConfig ExperimentConfig::segmentation_defaults() {
    ExperimentConfig cfg;
    cfg.task = Task::segmentation;
    cfg.architecture = "tiny_segnet";
    cfg.input_size = 512;
    cfg.batch_size = 8;
    cfg.epochs = 20;
    cfg.learning_rate = 1e-3;
    return cfg;
}

void ExperimentConfig::validate() const {
    if (!registry || !registry->contains(task, architecture))
        throw ConfigError("architecture '" + architecture + "' not in registry for " +
                          to_string(task));
    if (input_size < 4 || batch_size < 1 || epochs < 1 || folds < 2 || learning_rate <= 0)
        throw ConfigError("experiment config: bad hyperparameters");
    augment.validate();
}

namespace {

struct LoadedSample {
    data::FourChannelSample sample;
    int label = 0;
    std::string identifier;
};

int label_index(const std::vector<std::string>& labels, const std::string& cat) {
    const auto it = std::find(labels.begin(), labels.end(), cat);
    if (it == labels.end()) throw ValidationError("category not in label set: " + cat);
    return static_cast<int>(it - labels.begin());
}

std::vector<LoadedSample> load_all(const data::DatasetManifest& m,
                                   const std::vector<std::string>& labels, int size) {
    std::vector<LoadedSample> out;
    out.reserve(m.records.size());
    for (const auto& r : m.records) {
        LoadedSample ls;
        ls.sample = data::resize_sample(data::load_sample(m, r), size, size);
        ls.label = label_index(labels, r.category);
        ls.identifier = fs::absolute(m.image_path(r)).lexically_normal().string();
        out.push_back(std::move(ls));
    }
    return out;
}

NormStats compute_norms(const std::vector<LoadedSample>& train) {
    NormStats n;
    double count = 0;
    for (const auto& ls : train) {
        const size_t plane = ls.sample.rgb.plane();
        for (int c = 0; c < 3; ++c)
            for (size_t i = 0; i < plane; ++i) n.mean[c] += ls.sample.rgb.px[c * plane + i];
        count += static_cast<double>(plane);
    }
    for (double& m : n.mean) m /= std::max(count, 1.0);
    double var[3] = {0, 0, 0};
    for (const auto& ls : train) {
        const size_t plane = ls.sample.rgb.plane();
        for (int c = 0; c < 3; ++c)
            for (size_t i = 0; i < plane; ++i) {
                const double d = ls.sample.rgb.px[c * plane + i] - n.mean[c];
                var[c] += d * d;
            }
    }
    for (int c = 0; c < 3; ++c) n.std[c] = std::max(std::sqrt(var[c] / std::max(count, 1.0)), 1e-6);
    return n;
}

nn::Tensor to_input(const data::FourChannelSample& s, const NormStats& n) {
    const size_t plane = s.rgb.plane();
    std::vector<float> px(3 * plane);
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i)
            px[c * plane + i] =
                static_cast<float>((s.rgb.px[c * plane + i] - n.mean[c]) / n.std[c]);
    return nn::from_vec({3, s.rgb.height, s.rgb.width}, std::move(px));
}

nn::Tensor to_mask_target(const data::FourChannelSample& s) {
    std::vector<float> t(s.mask.px.size());
    for (size_t i = 0; i < t.size(); ++i) t[i] = s.mask.px[i] ? 1.f : 0.f;
    return nn::from_vec({1, s.mask.height, s.mask.width}, std::move(t));
}

void train_model(Model& model, const std::vector<LoadedSample>& train, const NormStats& norms,
                 const ExperimentConfig& cfg, uint64_t fold_seed) {
    auto params = model.parameters();
    for (auto& p : params) p.tensor.node()->requires_grad = true;
    nn::AdamW opt({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0});

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(fold_seed, 0x0e70c4, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const size_t end = std::min(order.size(), begin + cfg.batch_size);
            nn::zero_grads(params);
            const float inv_b = 1.f / static_cast<float>(end - begin);
            for (size_t j = begin; j < end; ++j) {
                const auto& ls = train[order[j]];
                const auto aug = data::augment_pair(
                    ls.sample, cfg.augment,
                    mix_seed(fold_seed ^ 0xa06a06, static_cast<uint64_t>(epoch), order[j]));
                auto input = to_input(aug, norms);
                auto out = model.forward(input);
                nn::Tensor loss;
                if (cfg.task == Task::classification) {
                    loss = nn::softmax_cross_entropy(out, ls.label);
                } else {
                    loss = nn::soft_dice_loss(out, to_mask_target(aug), 1.f);
                }
                nn::backward(nn::scale(loss, inv_b));
            }
            opt.step(params);
        }
    }
}

struct FoldScores {
    std::map<std::string, std::vector<double>> per_fold;  // metric -> fold values
    int undefined_asd = 0;
    int undefined_hd = 0;
};

metrics::MetricValue summarize(const std::vector<double>& folds, int undefined_count = 0) {
    metrics::MetricValue v;
    v.undefined_count = undefined_count;
    if (folds.empty()) {
        v.defined = false;
        return v;
    }
    double mean = 0;
    for (double x : folds) mean += x;
    mean /= static_cast<double>(folds.size());
    double var = 0;
    for (double x : folds) var += (x - mean) * (x - mean);
    v.value = mean;
    v.stddev = std::sqrt(var / static_cast<double>(folds.size()));
    v.has_stddev = true;
    return v;
}

data::DatasetManifest build_condition_manifest(const ExperimentConfig& cfg,
                                               const data::DatasetManifest& train_fold,
                                               const data::DatasetManifest* synth,
                                               uint64_t fold_seed) {
    if (cfg.condition == Condition::real) return train_fold;
    if (!synth)
        throw ConfigError("condition '" + to_string(cfg.condition) +
                          "' needs a synthetic manifest");
    data::HybridSpec spec;
    spec.total = train_fold.records.size();
    spec.real_fraction = cfg.condition == Condition::hybrid ? 0.5 : 0.0;
    return data::assemble_hybrid(train_fold, *synth, spec, mix_seed(fold_seed, 0x4b1d));
}

void audit_disjoint(const std::vector<LoadedSample>& train, const std::vector<LoadedSample>& val) {
    std::set<std::string> train_ids;
    for (const auto& ls : train) train_ids.insert(ls.identifier);
    for (const auto& ls : val)
        if (train_ids.count(ls.identifier))
            throw ValidationError("audit: validation sample leaked into training: " +
                                  ls.identifier);
}

ExperimentRun run_experiment(const ExperimentConfig& cfg, const data::DatasetManifest& real,
                             const data::DatasetManifest* synth) {
    cfg.validate();
    const auto folds = data::stratified_kfold(real, cfg.folds, cfg.seed);
    const int k = static_cast<int>(real.label_set.size());

    ExperimentRun run;
    run.config = cfg;
    run.label_set = real.label_set;

    FoldScores scores;
    for (int f = 0; f < cfg.folds; ++f) {
        const uint64_t fold_seed = mix_seed(cfg.seed, 0xf01d, static_cast<uint64_t>(f));
        const auto train_manifest = build_condition_manifest(cfg, folds[f].train, synth, fold_seed);
        auto train = load_all(train_manifest, real.label_set, cfg.input_size);
        auto val = load_all(folds[f].validation, real.label_set, cfg.input_size);
        audit_disjoint(train, val);

        const NormStats norms = compute_norms(train);
        auto model = cfg.registry->create(cfg.task, cfg.architecture, k, cfg.input_size, fold_seed);
        train_model(*model, train, norms, cfg, fold_seed);

        nn::NoGradGuard no_grad;
        if (cfg.task == Task::classification) {
            std::vector<int> preds, truth;
            for (const auto& ls : val) {
                auto out = model->forward(to_input(ls.sample, norms));
                const auto& logits = out.data();
                preds.push_back(static_cast<int>(
                    std::max_element(logits.begin(), logits.end()) - logits.begin()));
                truth.push_back(ls.label);
            }
            const auto rep = metrics::classification_report(metrics::confusion_matrix(preds, truth, k));
            scores.per_fold["Accuracy"].push_back(rep.accuracy * 100.0);
            scores.per_fold["Sensitivity"].push_back(rep.macro_sensitivity * 100.0);
            scores.per_fold["Precision"].push_back(rep.macro_precision * 100.0);
            scores.per_fold["F1score"].push_back(rep.macro_f1 * 100.0);
        } else {
            double dice = 0, iou = 0;
            std::vector<double> asds, hds;
            int undef_asd = 0, undef_hd = 0;
            for (const auto& ls : val) {
                auto out = model->forward(to_input(ls.sample, norms));
                Mask pred(ls.sample.mask.height, ls.sample.mask.width);
                for (size_t i = 0; i < pred.px.size(); ++i) pred.px[i] = out.data()[i] >= 0.f ? 1 : 0;
                metrics::MaskPair pair{pred, ls.sample.mask};
                const auto ov = metrics::dice_iou(pair);
                dice += ov.dice;
                iou += ov.iou;
                if (auto a = metrics::maybe_asd(pair)) asds.push_back(*a); else ++undef_asd;
                if (auto h = metrics::maybe_hausdorff(pair)) hds.push_back(*h); else ++undef_hd;
            }
            const double n = static_cast<double>(val.size());
            scores.per_fold["Dice"].push_back(dice / n * 100.0);
            scores.per_fold["IoU"].push_back(iou / n * 100.0);
            if (!asds.empty()) {
                double m = 0;
                for (double v : asds) m += v;
                scores.per_fold["ASD"].push_back(m / static_cast<double>(asds.size()));
            }
            if (!hds.empty()) {
                double m = 0;
                for (double v : hds) m += v;
                scores.per_fold["HD"].push_back(m / static_cast<double>(hds.size()));
            }
            scores.undefined_asd += undef_asd;
            scores.undefined_hd += undef_hd;
        }
        run.fold_models.push_back(model);
        run.fold_norms.push_back(norms);
    }

    metrics::MetricReport report;
    report.task = to_string(cfg.task);
    report.columns = cfg.task == Task::classification
                         ? std::vector<std::string>{"Accuracy", "Sensitivity", "Precision", "F1score"}
                         : std::vector<std::string>{"Dice", "IoU", "ASD", "HD"};
    metrics::ReportRow row;
    row.id = cfg.architecture + "/" + to_string(cfg.condition);
    for (const auto& col : report.columns) {
        int undef = col == "ASD" ? scores.undefined_asd : col == "HD" ? scores.undefined_hd : 0;
        row.values.emplace_back(col, summarize(scores.per_fold[col], undef));
    }
    report.rows.push_back(std::move(row));
    report.config = {{"architecture", cfg.architecture},
                     {"condition", to_string(cfg.condition)},
                     {"input_size", cfg.input_size},
                     {"batch_size", cfg.batch_size},
                     {"epochs", cfg.epochs},
                     {"learning_rate", cfg.learning_rate},
                     {"folds", cfg.folds},
                     {"seed", cfg.seed},
                     {"metric_scale", "percent except ASD/HD (pixels)"}};
    run.report = std::move(report);
    return run;
}

}  // namespace

ExperimentRun run_classification(const ExperimentConfig& cfg, const data::DatasetManifest& real,
                                 const data::DatasetManifest* synth) {
    if (cfg.task != Task::classification)
        throw ConfigError("run_classification: config task is not classification");
    return run_experiment(cfg, real, synth);
}

ExperimentRun run_segmentation(const ExperimentConfig& cfg, const data::DatasetManifest& real,
                               const data::DatasetManifest* synth) {
    if (cfg.task != Task::segmentation)
        throw ConfigError("run_segmentation: config task is not segmentation");
    return run_experiment(cfg, real, synth);
}

metrics::MetricReport run_robustness(const ExperimentRun& run, const data::DatasetManifest& external,
                                     const std::map<std::string, std::string>& label_mapping) {
    const auto& cfg = run.config;
    if (run.fold_models.empty()) throw ConfigError("run_robustness: no trained models");

    // Map external categories onto the trained label set.
    std::set<std::string> unmapped;
    data::DatasetManifest mapped = external;
    for (auto& r : mapped.records) {
        std::string target = r.category;
        if (!label_mapping.empty()) {
            auto it = label_mapping.find(r.category);
            if (it == label_mapping.end()) {
                unmapped.insert(r.category);
                continue;
            }
            target = it->second;
        }
        if (std::find(run.label_set.begin(), run.label_set.end(), target) == run.label_set.end())
            unmapped.insert(r.category);
        r.category = target;
    }
    if (!unmapped.empty()) {
        std::string list;
        for (const auto& c : unmapped) list += (list.empty() ? "" : ", ") + c;
        throw LabelMappingError("external classes not mapped onto the trained label set: " + list);
    }
    mapped.label_set = run.label_set;

    auto samples = load_all(mapped, run.label_set, cfg.input_size);
    const int k = static_cast<int>(run.label_set.size());

    FoldScores scores;
    nn::NoGradGuard no_grad;
    for (size_t f = 0; f < run.fold_models.size(); ++f) {
        auto& model = *run.fold_models[f];
        const auto& norms = run.fold_norms[f];
        if (cfg.task == Task::classification) {
            std::vector<int> preds, truth;
            for (const auto& ls : samples) {
                auto out = model.forward(to_input(ls.sample, norms));
                const auto& logits = out.data();
                preds.push_back(static_cast<int>(
                    std::max_element(logits.begin(), logits.end()) - logits.begin()));
                truth.push_back(ls.label);
            }
            const auto rep = metrics::classification_report(metrics::confusion_matrix(preds, truth, k));
            scores.per_fold["Accuracy"].push_back(rep.accuracy * 100.0);
            scores.per_fold["Sensitivity"].push_back(rep.macro_sensitivity * 100.0);
            scores.per_fold["Precision"].push_back(rep.macro_precision * 100.0);
            scores.per_fold["F1score"].push_back(rep.macro_f1 * 100.0);
        } else {
            double dice = 0, iou = 0;
            for (const auto& ls : samples) {
                auto out = model.forward(to_input(ls.sample, norms));
                Mask pred(ls.sample.mask.height, ls.sample.mask.width);
                for (size_t i = 0; i < pred.px.size(); ++i) pred.px[i] = out.data()[i] >= 0.f ? 1 : 0;
                const auto ov = metrics::dice_iou({pred, ls.sample.mask});
                dice += ov.dice;
                iou += ov.iou;
            }
            const double n = static_cast<double>(samples.size());
            scores.per_fold["Dice"].push_back(dice / n * 100.0);
            scores.per_fold["IoU"].push_back(iou / n * 100.0);
        }
    }

    metrics::MetricReport report;
    report.task = "robustness-" + to_string(cfg.task);
    report.columns = cfg.task == Task::classification
                         ? std::vector<std::string>{"Accuracy", "Sensitivity", "Precision", "F1score"}
                         : std::vector<std::string>{"Dice", "IoU"};
    metrics::ReportRow row;
    row.id = cfg.architecture + "/" + to_string(cfg.condition);
    for (const auto& col : report.columns) row.values.emplace_back(col, summarize(scores.per_fold[col]));
    report.rows.push_back(std::move(row));
    report.config = run.report.config;
    return report;
}

void save_experiment(const ExperimentRun& run, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json meta{{"task", to_string(run.config.task)},
                        {"architecture", run.config.architecture},
                        {"condition", to_string(run.config.condition)},
                        {"input_size", run.config.input_size},
                        {"seed", run.config.seed},
                        {"folds", static_cast<int>(run.fold_models.size())},
                        {"label_set", run.label_set}};
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& n : run.fold_norms)
        norms.push_back({{"mean", {n.mean[0], n.mean[1], n.mean[2]}},
                         {"std", {n.std[0], n.std[1], n.std[2]}}});
    meta["norms"] = norms;
    std::ofstream out(dir / "experiment.json");
    if (!out) throw IoError("cannot write experiment meta");
    out << meta.dump(2) << "\n";

    for (size_t f = 0; f < run.fold_models.size(); ++f) {
        ArrayMap arrays;
        for (const auto& p : run.fold_models[f]->parameters())
            arrays.emplace(p.name, NamedArray{p.tensor.shape(), p.tensor.data()});
        char name[48];
        std::snprintf(name, sizeof(name), "model-fold-%02zu.bin", f);
        save_arrays(dir / name, arrays);
    }
    run.report.save((dir / "report").string());
}

ExperimentRun load_experiment(const fs::path& dir, const ArchitectureRegistry& registry) {
    std::ifstream in(dir / "experiment.json");
    if (!in) throw IoError("cannot read experiment meta in " + dir.string());
    const nlohmann::json meta = nlohmann::json::parse(in);

    ExperimentRun run;
    run.config.task = task_from_string(meta.at("task").get<std::string>());
    run.config.architecture = meta.at("architecture").get<std::string>();
    run.config.condition = condition_from_string(meta.at("condition").get<std::string>());
    run.config.input_size = meta.at("input_size").get<int>();
    run.config.seed = meta.at("seed").get<uint64_t>();
    run.config.registry = &registry;
    run.label_set = meta.at("label_set").get<std::vector<std::string>>();

    const int folds = meta.at("folds").get<int>();
    for (int f = 0; f < folds; ++f) {
        NormStats n;
        for (int c = 0; c < 3; ++c) {
            n.mean[c] = meta.at("norms")[f]["mean"][c].get<double>();
            n.std[c] = meta.at("norms")[f]["std"][c].get<double>();
        }
        run.fold_norms.push_back(n);
        auto model = registry.create(run.config.task, run.config.architecture,
                                     static_cast<int>(run.label_set.size()), run.config.input_size,
                                     mix_seed(run.config.seed, 0xf01d, static_cast<uint64_t>(f)));
        char name[48];
        std::snprintf(name, sizeof(name), "model-fold-%02d.bin", f);
        const auto arrays = load_arrays(dir / name);
        for (auto& p : model->parameters()) {
            auto it = arrays.find(p.name);
            if (it == arrays.end() || it->second.data.size() != p.tensor.numel())
                throw IoError("model file mismatch for parameter " + p.name);
            p.tensor.data() = it->second.data;
        }
        run.fold_models.push_back(model);
    }
    run.report = metrics::MetricReport::load(dir / "report.json");
    return run;
}

ComparisonTable compare_conditions(const std::vector<metrics::MetricReport>& reports) {
    if (reports.size() < 2) throw ArgumentError("compare_conditions: need at least 2 reports");
    for (const auto& r : reports) {
        if (r.columns != reports.front().columns)
            throw ArgumentError("compare_conditions: metric sets differ");
        if (r.rows.size() != reports.front().rows.size())
            throw ArgumentError("compare_conditions: row counts differ");
    }
    static const std::set<std::string> lower_better{"ASD", "HD", "FID", "LPIPS"};

    ComparisonTable table;
    table.columns = reports.front().columns;
    table.deltas = nlohmann::json::array();

    std::ostringstream md;
    md << "| run |";
    for (const auto& c : table.columns) md << " " << c << " |";
    md << "\n|---|";
    for (size_t i = 0; i < table.columns.size(); ++i) md << "---|";
    md << "\n";

    for (size_t row = 0; row < reports.front().rows.size(); ++row) {
        // Best report per metric for this row, direction-aware.
        std::vector<size_t> best(table.columns.size(), 0);
        for (size_t col = 0; col < table.columns.size(); ++col) {
            const bool lower = lower_better.count(table.columns[col]) > 0;
            for (size_t rep = 1; rep < reports.size(); ++rep) {
                const auto* v = reports[rep].rows[row].find(table.columns[col]);
                const auto* b = reports[best[col]].rows[row].find(table.columns[col]);
                if (!v || !v->defined) continue;
                if (!b || !b->defined || (lower ? v->value < b->value : v->value > b->value))
                    best[col] = rep;
            }
        }
        for (size_t rep = 0; rep < reports.size(); ++rep) {
            const auto& r = reports[rep].rows[row];
            md << "| " << r.id << " |";
            nlohmann::json delta_row = nlohmann::json::object();
            for (size_t col = 0; col < table.columns.size(); ++col) {
                const auto* v = r.find(table.columns[col]);
                if (!v || !v->defined) {
                    md << " undefined |";
                    continue;
                }
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.3f", v->value);
                std::string cell = rep == best[col] ? "**" + std::string(buf) + "**" : buf;
                if (rep > 0) {
                    const auto* base = reports[0].rows[row].find(table.columns[col]);
                    if (base && base->defined) {
                        const double d = v->value - base->value;
                        delta_row[table.columns[col]] = d;
                        std::snprintf(buf, sizeof(buf), " (%+.3f)", d);
                        cell += buf;
                    }
                }
                md << " " << cell << " |";
            }
            if (rep > 0) table.deltas.push_back(delta_row);
            md << "\n";
        }
    }
    table.markdown = md.str();
    return table;
}

}  // namespace lesiongen::harness
