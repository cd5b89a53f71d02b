#include "appraiser/analysis.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace appraiser {

namespace {

using nlohmann::json;

constexpr const char* kComparisonSchema = "appraiser-comparison/1";

std::optional<double> drop_pp(std::optional<double> golden, std::optional<double> observed) {
    if (!golden || !observed) return std::nullopt;
    return (*golden - *observed) * 100.0;
}

}  // namespace

ComparisonReport compare(const FICampaignResult& fi, const AppraiserResult& apx,
                         double golden_accuracy, std::optional<double> golden_recall) {
    if (fi.affected_layer != apx.affected_layer) {
        throw ConfigError("comparison inputs target different layers: '" + fi.affected_layer +
                          "' vs '" + apx.affected_layer + "'");
    }
    if (fi.image_count != apx.image_count) {
        throw ConfigError("comparison inputs evaluated different dataset sizes");
    }
    if (fi.layers.size() != apx.layers.size()) {
        throw ConfigError("comparison inputs measured different layer sets");
    }
    ComparisonReport report;
    report.affected_layer = fi.affected_layer;
    report.fault_model = fi.fault_model;
    report.multiplier_name = apx.multiplier_name;
    report.repetitions = fi.repetitions;
    report.image_count = fi.image_count;
    std::vector<double> fi_pcts, apx_pcts;
    for (std::size_t i = 0; i < fi.layers.size(); ++i) {
        if (fi.layers[i].layer != apx.layers[i].layer) {
            throw ConfigError("comparison inputs measured different layer sets");
        }
        ComparisonReport::BitflipRow row;
        row.measured_layer = fi.layers[i].layer;
        row.fi_pct = fi.layers[i].bitflip_percentage();
        row.appraiser_pct = apx.layers[i].bitflip_percentage();
        fi_pcts.push_back(row.fi_pct);
        apx_pcts.push_back(row.appraiser_pct);
        report.bitflips.push_back(std::move(row));
    }
    report.fi_accuracy_drop_pp = (golden_accuracy - fi.mean_accuracy) * 100.0;
    report.fi_recall_drop_pp = drop_pp(golden_recall, fi.mean_recall);
    report.appraiser_accuracy_drop_pp = (golden_accuracy - apx.accuracy) * 100.0;
    report.appraiser_recall_drop_pp = drop_pp(golden_recall, apx.recall);
    report.rank_agreement = spearman_rank_agreement(fi_pcts, apx_pcts);
    return report;
}

CostModel estimate_cost(std::int64_t images, std::int64_t repetitions, double t_fi_ms,
                        double t_apx_ms) {
    if (images < 1 || repetitions < 1) throw ConfigError("cost model needs positive counts");
    if (!(t_fi_ms > 0.0) || !(t_apx_ms > 0.0)) throw ConfigError("cost model needs positive times");
    CostModel c;
    c.image_count = images;
    c.repetitions = repetitions;
    c.t_fi_ms = t_fi_ms;
    c.t_apx_ms = t_apx_ms;
    c.fi_total_ms = static_cast<double>(images) * static_cast<double>(repetitions) * t_fi_ms;
    c.appraiser_total_ms = static_cast<double>(images) * t_apx_ms;
    c.speedup = c.fi_total_ms / c.appraiser_total_ms;
    return c;
}

ReportFormat parse_report_format(const std::string& s) {
    if (s == "json") return ReportFormat::Json;
    if (s == "csv") return ReportFormat::Csv;
    throw ConfigError("unknown report format '" + s + "' (expected json|csv)");
}

namespace {

// shortest round-trip representation, shared by the JSON and CSV paths
std::string number_token(double v) { return json(v).dump(); }

std::string optional_token(const std::optional<double>& v) {
    return v ? number_token(*v) : "undefined";
}

json comparison_to_json(const ComparisonReport& r) {
    json j;
    j["schema"] = kComparisonSchema;
    j["affected_layer"] = r.affected_layer;
    j["fault_model"] = to_string(r.fault_model);
    j["multiplier"] = r.multiplier_name;
    j["repetitions"] = r.repetitions;
    j["image_count"] = r.image_count;
    j["bitflips"] = json::array();
    for (const auto& row : r.bitflips) {
        j["bitflips"].push_back({{"measured_layer", row.measured_layer},
                                 {"fi_pct", row.fi_pct},
                                 {"appraiser_pct", row.appraiser_pct}});
    }
    j["fi"] = {{"accuracy_drop_pp", r.fi_accuracy_drop_pp},
               {"recall_drop_pp", r.fi_recall_drop_pp ? json(*r.fi_recall_drop_pp) : json()}};
    j["appraiser"] = {{"accuracy_drop_pp", r.appraiser_accuracy_drop_pp},
                      {"recall_drop_pp",
                       r.appraiser_recall_drop_pp ? json(*r.appraiser_recall_drop_pp) : json()}};
    j["rank_agreement"] = r.rank_agreement ? json(*r.rank_agreement) : json();
    return j;
}

ComparisonReport comparison_from_json(const json& j) {
    if (j.value("schema", "") != kComparisonSchema) {
        throw FormatError("not an " + std::string(kComparisonSchema) + " document");
    }
    ComparisonReport r;
    r.affected_layer = j.at("affected_layer").get<std::string>();
    r.fault_model = parse_fault_model(j.at("fault_model").get<std::string>());
    r.multiplier_name = j.at("multiplier").get<std::string>();
    r.repetitions = j.at("repetitions").get<std::int64_t>();
    r.image_count = j.at("image_count").get<std::int64_t>();
    for (const json& row : j.at("bitflips")) {
        r.bitflips.push_back({row.at("measured_layer").get<std::string>(),
                              row.at("fi_pct").get<double>(),
                              row.at("appraiser_pct").get<double>()});
    }
    auto opt = [](const json& v) -> std::optional<double> {
        return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    };
    r.fi_accuracy_drop_pp = j.at("fi").at("accuracy_drop_pp").get<double>();
    r.fi_recall_drop_pp = opt(j.at("fi").at("recall_drop_pp"));
    r.appraiser_accuracy_drop_pp = j.at("appraiser").at("accuracy_drop_pp").get<double>();
    r.appraiser_recall_drop_pp = opt(j.at("appraiser").at("recall_drop_pp"));
    r.rank_agreement = opt(j.at("rank_agreement"));
    return r;
}

constexpr const char* kCsvHeader = "affected_layer,measured_layer,method,fault_model,metric,value";

std::string comparison_to_csv(const ComparisonReport& r) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    if (r.affected_layer.empty()) return out.str();  // empty comparison: header only
    const std::string fm = to_string(r.fault_model);
    auto line = [&](const std::string& measured, const std::string& method,
                    const std::string& metric, const std::string& value) {
        out << r.affected_layer << ',' << measured << ',' << method << ',' << fm << ',' << metric
            << ',' << value << "\n";
    };
    line("", "meta", "repetitions", std::to_string(r.repetitions));
    line("", "meta", "image_count", std::to_string(r.image_count));
    line("", "meta", "multiplier", r.multiplier_name);
    for (const auto& row : r.bitflips) {
        line(row.measured_layer, "fi", "bitflip_pct", number_token(row.fi_pct));
        line(row.measured_layer, "appraiser", "bitflip_pct", number_token(row.appraiser_pct));
    }
    line("", "fi", "accuracy_drop_pp", number_token(r.fi_accuracy_drop_pp));
    line("", "fi", "recall_drop_pp", optional_token(r.fi_recall_drop_pp));
    line("", "appraiser", "accuracy_drop_pp", number_token(r.appraiser_accuracy_drop_pp));
    line("", "appraiser", "recall_drop_pp", optional_token(r.appraiser_recall_drop_pp));
    line("", "both", "rank_agreement", optional_token(r.rank_agreement));
    return out.str();
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

ComparisonReport comparison_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || split_csv_row(line) != split_csv_row(kCsvHeader)) {
        throw FormatError("comparison CSV missing expected header");
    }
    ComparisonReport r;
    auto opt = [](const std::string& v) -> std::optional<double> {
        return v == "undefined" ? std::nullopt : std::optional<double>(json::parse(v).get<double>());
    };
    auto find_row = [&r](const std::string& measured) -> ComparisonReport::BitflipRow& {
        for (auto& row : r.bitflips) {
            if (row.measured_layer == measured) return row;
        }
        r.bitflips.push_back({measured, 0.0, 0.0});
        return r.bitflips.back();
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_row(line);
        if (f.size() != 6) throw FormatError("comparison CSV: bad row '" + line + "'");
        r.affected_layer = f[0];
        r.fault_model = parse_fault_model(f[3]);
        const std::string& method = f[2];
        const std::string& metric = f[4];
        const std::string& value = f[5];
        if (method == "meta") {
            if (metric == "repetitions") r.repetitions = std::stoll(value);
            else if (metric == "image_count") r.image_count = std::stoll(value);
            else if (metric == "multiplier") r.multiplier_name = value;
            else throw FormatError("comparison CSV: unknown meta metric '" + metric + "'");
        } else if (metric == "bitflip_pct") {
            auto& row = find_row(f[1]);
            (method == "fi" ? row.fi_pct : row.appraiser_pct) = json::parse(value).get<double>();
        } else if (method == "fi" && metric == "accuracy_drop_pp") {
            r.fi_accuracy_drop_pp = json::parse(value).get<double>();
        } else if (method == "fi" && metric == "recall_drop_pp") {
            r.fi_recall_drop_pp = opt(value);
        } else if (method == "appraiser" && metric == "accuracy_drop_pp") {
            r.appraiser_accuracy_drop_pp = json::parse(value).get<double>();
        } else if (method == "appraiser" && metric == "recall_drop_pp") {
            r.appraiser_recall_drop_pp = opt(value);
        } else if (method == "both" && metric == "rank_agreement") {
            r.rank_agreement = opt(value);
        } else {
            throw FormatError("comparison CSV: unknown row '" + line + "'");
        }
    }
    return r;
}

}  // namespace

std::string render_comparison(const ComparisonReport& report, ReportFormat format) {
    if (format == ReportFormat::Csv) return comparison_to_csv(report);
    return comparison_to_json(report).dump(2) + "\n";
}

ComparisonReport parse_comparison(const std::string& text, ReportFormat format) {
    if (format == ReportFormat::Csv) return comparison_from_csv(text);
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid comparison JSON");
    return comparison_from_json(j);
}

void export_report(const ComparisonReport& report, ReportFormat format,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report " + path.string());
    out << render_comparison(report, format);
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace appraiser
