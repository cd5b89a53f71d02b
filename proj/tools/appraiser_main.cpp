// appraiser: fault-resiliency assessment of int8 CNN layers, two ways.
//
//   fixture   materialize the deterministic demo model + dataset
//   rank      profile and rank candidate approximate multipliers
//   golden    fault-free reference run and scores
//   fi        reference statistical fault-injection campaign
//   appraise  single-pass assessment via multiplier substitution
//   compare   side-by-side report for one affected layer
//   cost      analysis cost model (iterative FI vs single pass)
//   export    re-emit a comparison report as json or csv

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "appraiser/analysis.hpp"
#include "appraiser/parallel.hpp"
#include "appraiser/reports.hpp"

namespace {

using appraiser::AccuracyRecall;
using appraiser::AppraiserConfig;
using appraiser::AppraiserResult;
using appraiser::CampaignConfig;
using appraiser::ComparisonReport;
using appraiser::CostModel;
using appraiser::Dataset;
using appraiser::FICampaignResult;
using appraiser::GoldenCache;
using appraiser::LayerTrace;
using appraiser::MultiplierModel;
using appraiser::NetworkModel;
using appraiser::ReportMeta;
using nlohmann::json;

struct LoadedInputs {
    NetworkModel model;
    Dataset data;
    ReportMeta meta;
};

LoadedInputs load_inputs(const std::string& model_path, const std::string& data_path) {
    LoadedInputs in;
    in.model = appraiser::load_model(model_path);
    in.data = appraiser::load_dataset(data_path);
    in.meta.model_digest = appraiser::checksum_hex(appraiser::model_checksum(in.model));
    in.meta.dataset_digest = appraiser::checksum_hex(appraiser::dataset_checksum(in.data));
    return in;
}

std::shared_ptr<const MultiplierModel> load_multiplier(const std::string& spec) {
    if (spec == "exact") {
        return std::make_shared<const MultiplierModel>(MultiplierModel::exact());
    }
    if (spec.rfind("truncated", 0) == 0 && spec.size() == 10 && spec[9] >= '0' && spec[9] <= '8') {
        return std::make_shared<const MultiplierModel>(MultiplierModel::truncated(spec[9] - '0'));
    }
    const std::filesystem::path path(spec);
    if (!std::filesystem::exists(path)) {
        throw appraiser::ConfigError(
            "multiplier '" + spec +
            "' is neither 'exact', 'truncated<k>' (k=0..8), nor an existing LUT file");
    }
    return std::make_shared<const MultiplierModel>(appraiser::load_lut(path, path.stem().string()));
}

std::string fmt_opt(const std::optional<double>& v, const char* fmt = "%.2f") {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, *v);
    return buf;
}

// Table-style "accuracy/recall" pair, one decimal, e.g. "2.3/4.7"
std::string fmt_drop_pair(double accuracy_pp, const std::optional<double>& recall_pp) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f/%s", accuracy_pp, fmt_opt(recall_pp, "%.1f").c_str());
    return buf;
}

void print_layer_table(const std::vector<appraiser::LayerMetrics>& layers,
                       const std::string& affected) {
    std::printf("  %-18s %10s\n", "Affected/Measured", "Bitflips[%]");
    for (const auto& m : layers) {
        std::printf("  %-18s %10.2f\n", (affected + "/" + m.layer).c_str(),
                    m.bitflip_percentage());
    }
}

int run_fixture(std::uint64_t seed, const std::string& out_dir) {
    const appraiser::Fixture fx = appraiser::generate_fixture(seed);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    appraiser::save_model(fx.model, dir / "model.json");
    appraiser::save_dataset(fx.data, dir / "data");
    std::printf("fixture seed %" PRIu64 ": model + %zu images written to %s\n", seed,
                fx.data.images.size(), dir.string().c_str());
    return 0;
}

int run_rank(const std::string& luts_dir, const std::vector<int>& builtins, double wvar,
             double wrms, const std::string& out) {
    std::vector<MultiplierModel> models;
    for (int k : builtins) models.push_back(MultiplierModel::truncated(k));
    if (!luts_dir.empty()) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(luts_dir)) {
            if (!e.is_regular_file()) continue;
            const auto ext = e.path().extension();
            if (ext == ".bin" || ext == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            models.push_back(appraiser::load_lut(f, f.stem().string()));
        }
    }
    if (models.empty()) {
        throw appraiser::ConfigError("no candidate multipliers (empty --luts dir, no --builtin)");
    }
    const auto ranked = appraiser::rank_candidates(models, wvar, wrms);

    std::printf("  %-16s %-10s %12s %12s %10s %10s %8s %14s\n", "name", "kind", "var_ed",
                "rms_ed", "mae", "err_rate", "worst", "score");
    json jranked = json::array();
    for (const auto& c : ranked) {
        const auto& m = models[c.model_index];
        const auto& p = c.error_profile;
        std::printf("  %-16s %-10s %12.3f %12.3f %10.3f %10.4f %8d %14.3f\n", c.name.c_str(),
                    appraiser::to_string(m.kind()), p.var_ed, p.rms_ed, p.mae, p.error_rate,
                    p.worst_ed, c.score);
        jranked.push_back({{"name", c.name},
                           {"kind", appraiser::to_string(m.kind())},
                           {"checksum", appraiser::checksum_hex(m.checksum())},
                           {"score", c.score},
                           {"var_ed", p.var_ed},
                           {"rms_ed", p.rms_ed},
                           {"mae", p.mae},
                           {"error_rate", p.error_rate},
                           {"worst_ed", p.worst_ed}});
    }
    if (!out.empty()) {
        json j;
        j["schema"] = "appraiser-ranking/1";
        j["weight_var"] = wvar;
        j["weight_rms"] = wrms;
        j["candidates"] = std::move(jranked);
        std::ofstream f(out, std::ios::binary);
        if (!f) throw appraiser::IoError("cannot write " + out);
        f << j.dump(2) << "\n";
        const json cfg = {{"luts", luts_dir}, {"builtin", builtins}, {"wvar", wvar}, {"wrms", wrms}};
        appraiser::write_run_manifest("rank", cfg.dump(), ReportMeta{}, 0.0, out);
    }
    return 0;
}

int run_golden(const std::string& model_path, const std::string& data_path,
               const std::string& out, const std::string& dump_dir, int threads) {
    const LoadedInputs in = load_inputs(model_path, data_path);
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<LayerTrace> traces = appraiser::golden_run(in.model, in.data, threads);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const AccuracyRecall scores = appraiser::accuracy_recall(
        traces, in.data.labels, in.data.class_count, in.data.positive_class);
    std::printf("golden: accuracy %.4f  recall %s over %zu images\n", scores.accuracy,
                fmt_opt(scores.recall, "%.4f").c_str(), traces.size());
    if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        for (std::size_t i = 0; i < traces.size(); ++i) {
            for (std::size_t l = 0; l < traces[i].outputs.size(); ++l) {
                char name[64];
                std::snprintf(name, sizeof name, "img%03zu_%s.bin", i,
                              in.model.layers[l].name.c_str());
                std::ofstream f(std::filesystem::path(dump_dir) / name, std::ios::binary);
                const auto span = traces[i].outputs[l].data();
                f.write(reinterpret_cast<const char*>(span.data()),
                        static_cast<std::streamsize>(span.size()));
            }
        }
    }
    if (!out.empty()) {
        appraiser::write_golden_report(traces, scores, in.meta, out);
        const json cfg = {{"model", model_path}, {"data", data_path}, {"threads", threads}};
        appraiser::write_run_manifest("golden", cfg.dump(), in.meta, wall_ms, out);
    }
    return 0;
}

int run_fi(const std::string& model_path, const std::string& data_path, const CampaignConfig& cfg,
           const std::string& out, int threads) {
    const LoadedInputs in = load_inputs(model_path, data_path);
    const FICampaignResult result = appraiser::run_fi_campaign(in.model, in.data, cfg, threads);
    std::printf("fi: layer %s, %s faults, %d repetitions, %" PRId64 " inferences\n",
                cfg.layer.c_str(), appraiser::to_string(cfg.fault_model), cfg.repetitions,
                result.inference_count);
    std::printf("  golden accuracy/recall: %.4f/%s\n", result.golden.accuracy,
                fmt_opt(result.golden.recall, "%.4f").c_str());
    std::printf("  mean accuracy/recall:   %.4f/%s\n", result.mean_accuracy,
                fmt_opt(result.mean_recall, "%.4f").c_str());
    print_layer_table(result.layers, result.affected_layer);
    if (!out.empty()) {
        appraiser::write_fi_report(result, in.meta, out);
        const json cfg_json = {{"model", model_path},
                               {"data", data_path},
                               {"layer", cfg.layer},
                               {"faults", appraiser::to_string(cfg.fault_model)},
                               {"reps", cfg.repetitions},
                               {"seed", cfg.seed},
                               {"per_image_independent", cfg.per_image_independent},
                               {"threads", threads}};
        appraiser::write_run_manifest("fi", cfg_json.dump(), in.meta, result.wall_ms, out);
    }
    return 0;
}

int run_appraise(const std::string& model_path, const std::string& data_path,
                 const std::string& layer, const std::string& mult_spec, double fraction,
                 const std::string& out, int threads) {
    const LoadedInputs in = load_inputs(model_path, data_path);
    AppraiserConfig cfg;
    cfg.layer = layer;
    cfg.multiplier = load_multiplier(mult_spec);
    cfg.substitution_fraction = fraction;
    const AppraiserResult result = appraiser::run_appraiser(in.model, in.data, cfg, threads);
    std::printf("appraise: layer %s with %s (fraction %.2f), %" PRId64 " inferences\n",
                layer.c_str(), result.multiplier_name.c_str(), fraction, result.inference_count);
    std::printf("  golden accuracy/recall:   %.4f/%s\n", result.golden.accuracy,
                fmt_opt(result.golden.recall, "%.4f").c_str());
    std::printf("  observed accuracy/recall: %.4f/%s\n", result.accuracy,
                fmt_opt(result.recall, "%.4f").c_str());
    print_layer_table(result.layers, result.affected_layer);
    if (!out.empty()) {
        appraiser::write_appraiser_report(result, in.meta, out);
        const json cfg_json = {{"model", model_path}, {"data", data_path},   {"layer", layer},
                               {"mult", mult_spec},   {"fraction", fraction}, {"threads", threads}};
        appraiser::write_run_manifest("appraise", cfg_json.dump(), in.meta, result.wall_ms, out);
    }
    return 0;
}

int run_compare(const std::string& fi_path, const std::string& apx_path, const std::string& out,
                const std::string& format) {
    const auto fi = appraiser::read_fi_report(fi_path);
    const auto apx = appraiser::read_appraiser_report(apx_path);
    if (fi.meta.model_digest != apx.meta.model_digest ||
        fi.meta.dataset_digest != apx.meta.dataset_digest) {
        throw appraiser::ConfigError("fi and appraiser reports were produced from different "
                                     "model/dataset inputs");
    }
    if (fi.result.golden.accuracy != apx.result.golden.accuracy) {
        throw appraiser::ConfigError("fi and appraiser reports disagree on the golden baseline");
    }
    const ComparisonReport report = appraiser::compare(
        fi.result, apx.result, fi.result.golden.accuracy, fi.result.golden.recall);

    std::printf("  %-18s %18s %22s\n", "Affected/Measured", "Fault Injection[%]",
                ("Approx " + report.multiplier_name + "[%]").c_str());
    for (const auto& row : report.bitflips) {
        std::printf("  %-18s %18.2f %22.2f\n",
                    (report.affected_layer + "/" + row.measured_layer).c_str(), row.fi_pct,
                    row.appraiser_pct);
    }
    std::printf("  accuracy/recall drop (pp): FI %s, APPRAISER %s\n",
                fmt_drop_pair(report.fi_accuracy_drop_pp, report.fi_recall_drop_pp).c_str(),
                fmt_drop_pair(report.appraiser_accuracy_drop_pp, report.appraiser_recall_drop_pp)
                    .c_str());
    std::printf("  bitflip rank agreement: %s\n", fmt_opt(report.rank_agreement, "%.3f").c_str());
    if (!out.empty()) {
        appraiser::export_report(report, appraiser::parse_report_format(format), out);
        const json cfg = {{"fi", fi_path}, {"appraise", apx_path}, {"format", format}};
        appraiser::write_run_manifest("compare", cfg.dump(), fi.meta, 0.0, out);
    }
    return 0;
}

int run_cost(std::int64_t images, std::int64_t reps, double tfi, double tapx,
             const std::string& out) {
    const CostModel c = appraiser::estimate_cost(images, reps, tfi, tapx);
    std::printf("  %-28s %16s %16s\n", "", "FI (iterative)", "APPRAISER");
    std::printf("  %-28s %16.2f %16.2f\n", "per-image inference [ms]", c.t_fi_ms, c.t_apx_ms);
    std::printf("  %-28s %16" PRId64 " %16" PRId64 "\n", "inferences", c.image_count * c.repetitions,
                c.image_count);
    std::printf("  %-28s %16.1f %16.1f\n", "total analysis time [ms]", c.fi_total_ms,
                c.appraiser_total_ms);
    std::printf("  speedup: %.0fx\n", c.speedup);
    if (!out.empty()) {
        appraiser::write_cost_report(c, out);
        const json cfg = {{"images", images}, {"reps", reps}, {"tfi", tfi}, {"tapx", tapx}};
        appraiser::write_run_manifest("cost", cfg.dump(), ReportMeta{}, 0.0, out);
    }
    return 0;
}

int run_export(const std::string& in_path, const std::string& format, const std::string& out) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw appraiser::IoError("cannot open " + in_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto in_format = std::filesystem::path(in_path).extension() == ".csv"
                               ? appraiser::ReportFormat::Csv
                               : appraiser::ReportFormat::Json;
    const ComparisonReport report = appraiser::parse_comparison(buf.str(), in_format);
    appraiser::export_report(report, appraiser::parse_report_format(format), out);
    const json cfg = {{"in", in_path}, {"format", format}};
    appraiser::write_run_manifest("export", cfg.dump(), ReportMeta{}, 0.0, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fault-resiliency assessment of int8 CNN layers: reference statistical fault "
                 "injection vs single-pass approximation-based analysis"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from a config file (flags win on conflict)");
    app.set_version_flag("--version", appraiser::kToolVersion);

    const int default_threads = appraiser::default_thread_count();

    // fixture
    auto* fixture = app.add_subcommand("fixture", "write the deterministic demo model + dataset");
    std::uint64_t fx_seed = 42;
    std::string fx_out = "fixture";
    fixture->add_option("--seed", fx_seed, "fixture seed");
    fixture->add_option("--out", fx_out, "output directory");

    // rank
    auto* rank = app.add_subcommand("rank", "profile and rank candidate multipliers");
    std::string rank_luts;
    std::vector<int> rank_builtin;
    double rank_wvar = 1.0, rank_wrms = 1.0;
    std::string rank_out;
    rank->add_option("--luts", rank_luts, "directory of .bin/.csv lookup tables");
    rank->add_option("--builtin", rank_builtin, "include built-in truncated(k) surrogates")
        ->check(CLI::Range(0, 8));
    rank->add_option("--wvar", rank_wvar, "weight on var_ed");
    rank->add_option("--wrms", rank_wrms, "weight on rms_ed");
    rank->add_option("--out", rank_out, "write ranking JSON here");

    // golden
    auto* golden = app.add_subcommand("golden", "fault-free reference run");
    std::string g_model, g_data, g_out, g_dump;
    int g_threads = default_threads;
    golden->add_option("--model", g_model, "model manifest path")->required();
    golden->add_option("--data", g_data, "dataset directory")->required();
    golden->add_option("--out", g_out, "write golden report here");
    golden->add_option("--dump-traces", g_dump, "dump per-layer outputs as raw int8 blobs");
    golden->add_option("--threads", g_threads, "worker threads");

    // fi
    auto* fi = app.add_subcommand("fi", "reference fault-injection campaign");
    std::string fi_model, fi_data, fi_layer, fi_faults = "single", fi_out;
    int fi_reps = 1000, fi_threads = default_threads;
    std::uint64_t fi_seed = 0;
    bool fi_batch_shared = false;
    fi->add_option("--model", fi_model, "model manifest path")->required();
    fi->add_option("--data", fi_data, "dataset directory")->required();
    fi->add_option("--layer", fi_layer, "compromised layer")->required();
    fi->add_option("--faults", fi_faults, "fault model: single|double");
    fi->add_option("--reps", fi_reps, "repetitions (faults per image)");
    fi->add_option("--seed", fi_seed, "campaign seed")->required();
    fi->add_flag("--batch-shared", fi_batch_shared,
                 "share one fault across the batch per repetition");
    fi->add_option("--out", fi_out, "write campaign report here");
    fi->add_option("--threads", fi_threads, "worker threads");

    // appraise
    auto* appraise = app.add_subcommand("appraise", "single-pass approximation-based assessment");
    std::string ap_model, ap_data, ap_layer, ap_mult, ap_out;
    double ap_fraction = 1.0;
    int ap_threads = default_threads;
    appraise->add_option("--model", ap_model, "model manifest path")->required();
    appraise->add_option("--data", ap_data, "dataset directory")->required();
    appraise->add_option("--layer", ap_layer, "compromised layer")->required();
    appraise->add_option("--mult", ap_mult, "multiplier: exact, truncated<k>, or LUT file")
        ->required();
    appraise->add_option("--fraction", ap_fraction, "substituted share of each MAC's products")
        ->check(CLI::Range(0.0, 1.0));
    appraise->add_option("--out", ap_out, "write assessment report here");
    appraise->add_option("--threads", ap_threads, "worker threads");

    // compare
    auto* compare = app.add_subcommand("compare", "side-by-side fi vs appraiser report");
    std::string cp_fi, cp_apx, cp_out, cp_format = "json";
    compare->add_option("--fi", cp_fi, "fi report path")->required();
    compare->add_option("--appraise", cp_apx, "appraiser report path")->required();
    compare->add_option("--out", cp_out, "write comparison here");
    compare->add_option("--format", cp_format, "json|csv");

    // cost
    auto* cost = app.add_subcommand("cost", "analysis cost model");
    std::int64_t c_images = 0, c_reps = 0;
    double c_tfi = 0.0, c_tapx = 0.0;
    std::string c_out;
    cost->add_option("--images", c_images, "validation set size")->required();
    cost->add_option("--reps", c_reps, "fault-injection repetitions")->required();
    cost->add_option("--tfi", c_tfi, "per-image time, FI-instrumented [ms]")->required();
    cost->add_option("--tapx", c_tapx, "per-image time, assessment-instrumented [ms]")->required();
    cost->add_option("--out", c_out, "write cost report here");

    // export
    auto* exp = app.add_subcommand("export", "re-emit a comparison report");
    std::string e_in, e_format = "csv", e_out;
    exp->add_option("--in", e_in, "comparison report (.json or .csv)")->required();
    exp->add_option("--format", e_format, "json|csv");
    exp->add_option("--out", e_out, "output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fixture) return run_fixture(fx_seed, fx_out);
        if (*rank) return run_rank(rank_luts, rank_builtin, rank_wvar, rank_wrms, rank_out);
        if (*golden) return run_golden(g_model, g_data, g_out, g_dump, g_threads);
        if (*fi) {
            CampaignConfig cfg;
            cfg.layer = fi_layer;
            cfg.fault_model = appraiser::parse_fault_model(fi_faults);
            cfg.repetitions = fi_reps;
            cfg.seed = fi_seed;
            cfg.per_image_independent = !fi_batch_shared;
            return run_fi(fi_model, fi_data, cfg, fi_out, fi_threads);
        }
        if (*appraise) {
            return run_appraise(ap_model, ap_data, ap_layer, ap_mult, ap_fraction, ap_out,
                                ap_threads);
        }
        if (*compare) return run_compare(cp_fi, cp_apx, cp_out, cp_format);
        if (*cost) return run_cost(c_images, c_reps, c_tfi, c_tapx, c_out);
        if (*exp) return run_export(e_in, e_format, e_out);
    } catch (const appraiser::Error& e) {
        std::fprintf(stderr, "appraiser: error [%s]: %s\n", appraiser::to_string(e.category()),
                     e.what());
        switch (e.category()) {
            case appraiser::ErrorCategory::Io: return 3;
            case appraiser::ErrorCategory::Format: return 4;
            case appraiser::ErrorCategory::Shape: return 5;
            case appraiser::ErrorCategory::Address: return 6;
            case appraiser::ErrorCategory::Config: return 7;
            case appraiser::ErrorCategory::Comparison: return 8;
        }
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "appraiser: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
