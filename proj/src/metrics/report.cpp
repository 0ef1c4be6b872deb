#include "lesiongen/metrics/report.hpp"

#include <fstream>
#include <sstream>

#include "lesiongen/core/error.hpp"

namespace lesiongen::metrics {

const MetricValue* ReportRow::find(const std::string& column) const {
    for (const auto& [name, v] : values)
        if (name == column) return &v;
    return nullptr;
}

void MetricReport::check_shape() const {
    for (const auto& row : rows) {
        if (row.values.size() != columns.size())
            throw ValidationError("report row '" + row.id + "' has " +
                                  std::to_string(row.values.size()) + " values, expected " +
                                  std::to_string(columns.size()));
        for (size_t i = 0; i < columns.size(); ++i)
            if (row.values[i].first != columns[i])
                throw ValidationError("report row '" + row.id + "' column " + std::to_string(i) +
                                      " is '" + row.values[i].first + "', expected '" + columns[i] +
                                      "'");
    }
}

nlohmann::json MetricReport::to_json() const {
    check_shape();
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json values = nlohmann::json::object();
        for (const auto& [name, v] : row.values) {
            nlohmann::json cell{{"value", v.value}, {"defined", v.defined}};
            if (v.undefined_count > 0) cell["undefined_count"] = v.undefined_count;
            if (v.has_stddev) cell["stddev"] = v.stddev;
            values[name] = cell;
        }
        rows_json.push_back({{"id", row.id}, {"values", values}});
    }
    return nlohmann::json{{"task", task},
                          {"columns", columns},
                          {"rows", rows_json},
                          {"dataset_ids", dataset_ids},
                          {"config", config}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    r.task = j.at("task").get<std::string>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    r.dataset_ids = j.value("dataset_ids", nlohmann::json::object());
    r.config = j.value("config", nlohmann::json::object());
    for (const auto& row_json : j.at("rows")) {
        ReportRow row;
        row.id = row_json.at("id").get<std::string>();
        for (const auto& col : r.columns) {
            const auto& cell = row_json.at("values").at(col);
            MetricValue v;
            v.value = cell.at("value").get<double>();
            v.defined = cell.value("defined", true);
            v.undefined_count = cell.value("undefined_count", 0);
            if (cell.contains("stddev")) {
                v.stddev = cell["stddev"].get<double>();
                v.has_stddev = true;
            }
            row.values.emplace_back(col, v);
        }
        r.rows.push_back(std::move(row));
    }
    r.check_shape();
    return r;
}

std::string MetricReport::to_csv() const {
    check_shape();
    std::ostringstream out;
    out << "id";
    for (const auto& c : columns) out << "," << c;
    out << "\n";
    for (const auto& row : rows) {
        out << row.id;
        for (const auto& [name, v] : row.values) {
            out << ",";
            if (v.defined) {
                char buf[48];
                std::snprintf(buf, sizeof(buf), "%.9g", v.value);
                out << buf;
            } else {
                out << "undefined";
            }
        }
        out << "\n";
    }
    return out.str();
}

void MetricReport::save(const std::filesystem::path& stem) const {
    std::ofstream js(stem.string() + ".json");
    if (!js) throw IoError("cannot write report " + stem.string() + ".json");
    js << to_json().dump(2) << "\n";
    std::ofstream cs(stem.string() + ".csv");
    if (!cs) throw IoError("cannot write report " + stem.string() + ".csv");
    cs << to_csv();
}

MetricReport MetricReport::load(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot read report " + json_path.string());
    return from_json(nlohmann::json::parse(in));
}

bool validate_report_schema(const nlohmann::json& report, const nlohmann::json& schema,
                            std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (report.value("task", "") != schema.at("task").get<std::string>())
        return fail("task is '" + report.value("task", "") + "', schema wants '" +
                    schema.at("task").get<std::string>() + "'");
    const auto want = schema.at("columns").get<std::vector<std::string>>();
    const auto have = report.value("columns", std::vector<std::string>{});
    if (have != want) {
        std::string msg = "columns mismatch: have [";
        for (const auto& c : have) msg += c + ",";
        msg += "] want [";
        for (const auto& c : want) msg += c + ",";
        return fail(msg + "]");
    }
    if (!report.contains("rows") || report["rows"].empty()) return fail("report has no rows");
    for (const auto& row : report["rows"])
        for (const auto& col : want)
            if (!row.at("values").contains(col))
                return fail("row '" + row.value("id", "") + "' missing column " + col);
    return true;
}

}  // namespace lesiongen::metrics
