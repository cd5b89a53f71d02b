#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "appraiser/analysis.hpp"

namespace appraiser {

inline constexpr const char* kToolVersion = "1.0.0";

// Input digests stored in every report so downstream comparison can refuse
// mismatched runs.
struct ReportMeta {
    std::string model_digest;
    std::string dataset_digest;
};

// Report files are deterministic: identical config and seed give identical
// bytes at any thread count. Measured wall-clock time goes only into the run
// manifest sidecar.
void write_fi_report(const FICampaignResult& result, const ReportMeta& meta,
                     const std::filesystem::path& path);
void write_appraiser_report(const AppraiserResult& result, const ReportMeta& meta,
                            const std::filesystem::path& path);
void write_golden_report(const std::vector<LayerTrace>& traces, const AccuracyRecall& scores,
                         const ReportMeta& meta, const std::filesystem::path& path);
void write_cost_report(const CostModel& cost, const std::filesystem::path& path);

struct LoadedFiReport {
    FICampaignResult result;
    ReportMeta meta;
};
struct LoadedAppraiserReport {
    AppraiserResult result;
    ReportMeta meta;
};

LoadedFiReport read_fi_report(const std::filesystem::path& path);
LoadedAppraiserReport read_appraiser_report(const std::filesystem::path& path);

// `<report>.manifest.json`: resolved configuration, input digests, tool
// version and measured timing — everything needed to re-execute the run.
void write_run_manifest(const std::string& subcommand, const std::string& config_json,
                        const ReportMeta& meta, double wall_ms,
                        const std::filesystem::path& report_path);

}  // namespace appraiser
