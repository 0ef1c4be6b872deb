#pragma once

#include <filesystem>
#include <optional>

#include "lesiongen/data/augment.hpp"
#include "lesiongen/data/split.hpp"
#include "lesiongen/harness/registry.hpp"
#include "lesiongen/metrics/report.hpp"

namespace lesiongen::harness {

enum class Condition { real, synth, hybrid };

Condition condition_from_string(const std::string& s);
std::string to_string(Condition c);

struct ExperimentConfig {
    Task task = Task::classification;
    std::string architecture = "tiny_cnn";
    Condition condition = Condition::hybrid;
    int input_size = 224;
    int batch_size = 32;
    int epochs = 50;
    double learning_rate = 1e-4;
    int folds = 5;
    uint64_t seed = 0;
    data::AugmentationConfig augment = {};  // training only; eval is resize+normalize
    const ArchitectureRegistry* registry = &ArchitectureRegistry::builtins();

    static ExperimentConfig classification_defaults();
    static ExperimentConfig segmentation_defaults();
    void validate() const;
};

// Per-fold image normalization constants, computed from the training split.
struct NormStats {
    double mean[3] = {0, 0, 0};
    double std[3] = {1, 1, 1};
};

struct ExperimentRun {
    metrics::MetricReport report;
    std::vector<ModelPtr> fold_models;
    std::vector<NormStats> fold_norms;
    std::vector<std::string> label_set;
    ExperimentConfig config;
};

// 5-fold stratified CV on the real manifest; synthetic records enter training
// folds only and the validation fold is always real. Hybrid folds mix
// 50/50 at the training-fold size. Reports are fold means (stddev kept in the
// JSON). Train/validation identifier intersection is audited to be empty.
ExperimentRun run_classification(const ExperimentConfig& cfg, const data::DatasetManifest& real,
                                 const data::DatasetManifest* synth);

// Dice-loss training; evaluation reports Dice/IoU/ASD/HD on the real
// validation fold, with undefined surface distances excluded and counted.
ExperimentRun run_segmentation(const ExperimentConfig& cfg, const data::DatasetManifest& real,
                               const data::DatasetManifest* synth);

// Evaluates the already-trained fold models on an external manifest without
// retraining. The mapping renames external categories onto the trained label
// set; unmapped classes raise LabelMappingError.
metrics::MetricReport run_robustness(const ExperimentRun& run,
                                     const data::DatasetManifest& external,
                                     const std::map<std::string, std::string>& label_mapping);

// Persistence for eval-robust runs in a separate process.
void save_experiment(const ExperimentRun& run, const std::filesystem::path& dir);
ExperimentRun load_experiment(const std::filesystem::path& dir,
                              const ArchitectureRegistry& registry = ArchitectureRegistry::builtins());

// Side-by-side comparison of >= 2 reports with identical columns and row
// counts. Deltas are against the first report; the best value per metric is
// bold in the rendered markdown.
struct ComparisonTable {
    std::vector<std::string> columns;
    std::string markdown;
    nlohmann::json deltas;  // rows x columns, report_i - report_0
};

ComparisonTable compare_conditions(const std::vector<metrics::MetricReport>& reports);

}  // namespace lesiongen::harness
