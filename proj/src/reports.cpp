#include "appraiser/reports.hpp"

#include <fstream>

#include "json.hpp"

namespace appraiser {

namespace {

using nlohmann::json;

constexpr const char* kReportSchema = "appraiser-report/1";
constexpr const char* kCostSchema = "appraiser-cost/1";
constexpr const char* kManifestSchema = "appraiser-manifest/1";

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::optional<double> optional_from_json(const json& v) {
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

json optionals_to_json(const std::vector<std::optional<double>>& v) {
    json arr = json::array();
    for (const auto& e : v) arr.push_back(optional_to_json(e));
    return arr;
}

std::vector<std::optional<double>> optionals_from_json(const json& arr) {
    std::vector<std::optional<double>> v;
    for (const json& e : arr) v.push_back(optional_from_json(e));
    return v;
}

json scores_to_json(const AccuracyRecall& s) {
    return {{"accuracy", s.accuracy},
            {"recall", optional_to_json(s.recall)},
            {"recall_per_class", optionals_to_json(s.recall_per_class)}};
}

AccuracyRecall scores_from_json(const json& j) {
    AccuracyRecall s;
    s.accuracy = j.at("accuracy").get<double>();
    s.recall = optional_from_json(j.at("recall"));
    s.recall_per_class = optionals_from_json(j.at("recall_per_class"));
    return s;
}

json layer_metrics_to_json(const LayerMetrics& m) {
    return {{"layer", m.layer},
            {"mismatched_bits", m.mismatched_bits},
            {"total_bits", m.total_bits},
            {"bitflip_pct", m.bitflip_percentage()},
            {"normalized_error",
             {{"divisor", m.error_stats.divisor},
              {"neuron_means", m.error_stats.neuron_means},
              {"histogram",
               {{"edges", m.error_stats.histogram_edges},
                {"counts", m.error_stats.histogram_counts}}}}}};
}

LayerMetrics layer_metrics_from_json(const json& j) {
    LayerMetrics m;
    m.layer = j.at("layer").get<std::string>();
    m.mismatched_bits = j.at("mismatched_bits").get<std::int64_t>();
    m.total_bits = j.at("total_bits").get<std::int64_t>();
    const json& ne = j.at("normalized_error");
    m.error_stats.divisor = ne.at("divisor").get<std::int64_t>();
    m.error_stats.neuron_means = ne.at("neuron_means").get<std::vector<double>>();
    m.error_stats.histogram_edges = ne.at("histogram").at("edges").get<std::vector<double>>();
    m.error_stats.histogram_counts =
        ne.at("histogram").at("counts").get<std::vector<std::int64_t>>();
    return m;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to " + path.string());
}

json read_report_json(const std::filesystem::path& path, const std::string& method) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid JSON in " + path.string());
    if (j.value("schema", "") != kReportSchema || j.value("method", "") != method) {
        throw FormatError(path.string() + " is not an " + std::string(kReportSchema) + " '" +
                          method + "' report");
    }
    return j;
}

}  // namespace

void write_fi_report(const FICampaignResult& result, const ReportMeta& meta,
                     const std::filesystem::path& path) {
    json j;
    j["schema"] = kReportSchema;
    j["method"] = "fi";
    j["affected_layer"] = result.affected_layer;
    j["fault_model"] = to_string(result.fault_model);
    j["repetitions"] = result.repetitions;
    j["seed"] = result.seed;
    j["per_image_independent"] = result.per_image_independent;
    j["image_count"] = result.image_count;
    j["inference_count"] = result.inference_count;
    j["model_digest"] = meta.model_digest;
    j["dataset_digest"] = meta.dataset_digest;
    j["golden"] = scores_to_json(result.golden);
    j["mean_accuracy"] = result.mean_accuracy;
    j["mean_recall"] = optional_to_json(result.mean_recall);
    j["mean_recall_per_class"] = optionals_to_json(result.mean_recall_per_class);
    j["layers"] = json::array();
    for (const LayerMetrics& m : result.layers) j["layers"].push_back(layer_metrics_to_json(m));
    write_json_file(j, path);
}

LoadedFiReport read_fi_report(const std::filesystem::path& path) {
    const json j = read_report_json(path, "fi");
    LoadedFiReport loaded;
    FICampaignResult& r = loaded.result;
    r.affected_layer = j.at("affected_layer").get<std::string>();
    r.fault_model = parse_fault_model(j.at("fault_model").get<std::string>());
    r.repetitions = j.at("repetitions").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.per_image_independent = j.at("per_image_independent").get<bool>();
    r.image_count = j.at("image_count").get<std::int64_t>();
    r.inference_count = j.at("inference_count").get<std::int64_t>();
    r.golden = scores_from_json(j.at("golden"));
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.mean_recall = optional_from_json(j.at("mean_recall"));
    r.mean_recall_per_class = optionals_from_json(j.at("mean_recall_per_class"));
    for (const json& lj : j.at("layers")) r.layers.push_back(layer_metrics_from_json(lj));
    loaded.meta = {j.at("model_digest").get<std::string>(),
                   j.at("dataset_digest").get<std::string>()};
    return loaded;
}

void write_appraiser_report(const AppraiserResult& result, const ReportMeta& meta,
                            const std::filesystem::path& path) {
    json j;
    j["schema"] = kReportSchema;
    j["method"] = "appraiser";
    j["affected_layer"] = result.affected_layer;
    j["multiplier"] = result.multiplier_name;
    j["substitution_fraction"] = result.substitution_fraction;
    j["image_count"] = result.image_count;
    j["inference_count"] = result.inference_count;
    j["model_digest"] = meta.model_digest;
    j["dataset_digest"] = meta.dataset_digest;
    j["golden"] = scores_to_json(result.golden);
    j["accuracy"] = result.accuracy;
    j["recall"] = optional_to_json(result.recall);
    j["recall_per_class"] = optionals_to_json(result.recall_per_class);
    j["layers"] = json::array();
    for (const LayerMetrics& m : result.layers) j["layers"].push_back(layer_metrics_to_json(m));
    write_json_file(j, path);
}

LoadedAppraiserReport read_appraiser_report(const std::filesystem::path& path) {
    const json j = read_report_json(path, "appraiser");
    LoadedAppraiserReport loaded;
    AppraiserResult& r = loaded.result;
    r.affected_layer = j.at("affected_layer").get<std::string>();
    r.multiplier_name = j.at("multiplier").get<std::string>();
    r.substitution_fraction = j.at("substitution_fraction").get<double>();
    r.image_count = j.at("image_count").get<std::int64_t>();
    r.inference_count = j.at("inference_count").get<std::int64_t>();
    r.golden = scores_from_json(j.at("golden"));
    r.accuracy = j.at("accuracy").get<double>();
    r.recall = optional_from_json(j.at("recall"));
    r.recall_per_class = optionals_from_json(j.at("recall_per_class"));
    for (const json& lj : j.at("layers")) r.layers.push_back(layer_metrics_from_json(lj));
    loaded.meta = {j.at("model_digest").get<std::string>(),
                   j.at("dataset_digest").get<std::string>()};
    return loaded;
}

void write_golden_report(const std::vector<LayerTrace>& traces, const AccuracyRecall& scores,
                         const ReportMeta& meta, const std::filesystem::path& path) {
    json j;
    j["schema"] = kReportSchema;
    j["method"] = "golden";
    j["image_count"] = traces.size();
    j["model_digest"] = meta.model_digest;
    j["dataset_digest"] = meta.dataset_digest;
    j["accuracy"] = scores.accuracy;
    j["recall"] = optional_to_json(scores.recall);
    j["recall_per_class"] = optionals_to_json(scores.recall_per_class);
    json preds = json::array();
    for (const LayerTrace& t : traces) preds.push_back(t.predicted);
    j["predictions"] = std::move(preds);
    write_json_file(j, path);
}

void write_cost_report(const CostModel& cost, const std::filesystem::path& path) {
    json j;
    j["schema"] = kCostSchema;
    j["image_count"] = cost.image_count;
    j["repetitions"] = cost.repetitions;
    j["t_fi_ms"] = cost.t_fi_ms;
    j["t_apx_ms"] = cost.t_apx_ms;
    j["fi_total_ms"] = cost.fi_total_ms;
    j["appraiser_total_ms"] = cost.appraiser_total_ms;
    j["speedup"] = cost.speedup;
    write_json_file(j, path);
}

void write_run_manifest(const std::string& subcommand, const std::string& config_json,
                        const ReportMeta& meta, double wall_ms,
                        const std::filesystem::path& report_path) {
    json j;
    j["schema"] = kManifestSchema;
    j["tool_version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["config"] = json::parse(config_json);
    j["inputs"] = {{"model_digest", meta.model_digest}, {"dataset_digest", meta.dataset_digest}};
    j["timing_ms"] = wall_ms;  // measured: the one field that varies between runs
    std::filesystem::path p = report_path;
    p += ".manifest.json";
    write_json_file(j, p);
}

}  // namespace appraiser
