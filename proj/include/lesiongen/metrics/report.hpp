#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lesiongen::metrics {

// One metric cell; `defined` is false when the metric did not apply (e.g.
// surface distances with empty boundaries) and undefined_count says how many
// inputs were excluded from the mean.
struct MetricValue {
    double value = 0.0;
    bool defined = true;
    int undefined_count = 0;
    double stddev = 0.0;
    bool has_stddev = false;
};

struct ReportRow {
    std::string id;  // model / dataset condition / pairing
    std::vector<std::pair<std::string, MetricValue>> values;

    const MetricValue* find(const std::string& column) const;
};

// Structured evaluation results; `columns` fixes the table shape the paper's
// result tables use, and rows carry one entry per column.
struct MetricReport {
    std::string task;  // generation-quality | classification | segmentation | robustness-*
    std::vector<std::string> columns;
    std::vector<ReportRow> rows;
    nlohmann::json dataset_ids = nlohmann::json::object();
    nlohmann::json config = nlohmann::json::object();

    void check_shape() const;  // every row carries exactly the declared columns
    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
    std::string to_csv() const;

    void save(const std::filesystem::path& stem) const;  // writes stem.json and stem.csv
    static MetricReport load(const std::filesystem::path& json_path);
};

// Golden-schema check: task matches and columns are exactly the schema's, in
// order. Returns false and fills `why` on mismatch.
bool validate_report_schema(const nlohmann::json& report, const nlohmann::json& schema,
                            std::string* why = nullptr);

}  // namespace lesiongen::metrics
