#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/appraise.hpp"
#include "appraiser/fault_injection.hpp"

namespace appraiser {

// FI-vs-APPRAISER comparison for one affected layer: per-measured-layer
// bitflip percentages side by side, accuracy/recall drops in percentage
// points versus golden, and the rank agreement between the two methods'
// bitflip columns.
struct ComparisonReport {
    std::string affected_layer;
    FaultModel fault_model = FaultModel::Single;
    std::string multiplier_name;
    std::int64_t repetitions = 0;
    std::int64_t image_count = 0;

    struct BitflipRow {
        std::string measured_layer;
        double fi_pct = 0.0;
        double appraiser_pct = 0.0;
    };
    std::vector<BitflipRow> bitflips;  // affected layer onward, model order

    double fi_accuracy_drop_pp = 0.0;
    std::optional<double> fi_recall_drop_pp;  // absent when recall is undefined
    double appraiser_accuracy_drop_pp = 0.0;
    std::optional<double> appraiser_recall_drop_pp;

    std::optional<double> rank_agreement;  // Spearman over the bitflip columns
};

ComparisonReport compare(const FICampaignResult& fi, const AppraiserResult& apx,
                         double golden_accuracy, std::optional<double> golden_recall);

// Analysis cost model: an iterative campaign costs images x repetitions
// instrumented inferences, the single-pass assessment costs one per image.
struct CostModel {
    std::int64_t image_count = 0;
    std::int64_t repetitions = 0;
    double t_fi_ms = 0.0;   // per-image inference time, FI-instrumented
    double t_apx_ms = 0.0;  // per-image inference time, assessment-instrumented
    double fi_total_ms = 0.0;
    double appraiser_total_ms = 0.0;
    double speedup = 0.0;
};

CostModel estimate_cost(std::int64_t images, std::int64_t repetitions, double t_fi_ms,
                        double t_apx_ms);

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(const std::string& s);

// Deterministic serialization; see docs/formats.md for the JSON schema and
// the CSV column layout. Both formats round-trip through the parsers below.
void export_report(const ComparisonReport& report, ReportFormat format,
                   const std::filesystem::path& path);
std::string render_comparison(const ComparisonReport& report, ReportFormat format);
ComparisonReport parse_comparison(const std::string& text, ReportFormat format);

}  // namespace appraiser
