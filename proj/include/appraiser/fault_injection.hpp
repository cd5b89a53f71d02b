#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/metrics.hpp"
#include "appraiser/rng.hpp"

namespace appraiser {

enum class FaultModel { Single, Double };

const char* to_string(FaultModel m);
FaultModel parse_fault_model(const std::string& s);

struct CampaignConfig {
    std::string layer;
    FaultModel fault_model = FaultModel::Single;
    int repetitions = 1000;
    std::uint64_t seed = 0;
    // true: a fresh fault per (repetition, image); false: one fault shared by
    // the whole batch per repetition.
    bool per_image_independent = true;
};

struct FICampaignResult {
    std::string affected_layer;
    FaultModel fault_model = FaultModel::Single;
    int repetitions = 0;
    std::uint64_t seed = 0;
    bool per_image_independent = true;
    std::int64_t image_count = 0;
    std::int64_t inference_count = 0;  // always repetitions * image_count

    double mean_accuracy = 0.0;
    std::optional<double> mean_recall;
    std::vector<std::optional<double>> mean_recall_per_class;

    AccuracyRecall golden;
    std::vector<LayerMetrics> layers;  // affected layer through the output layer

    double wall_ms = 0.0;  // measured; never serialized into reports
};

// Sample size n = ceil(N / (1 + e^2 (N-1) / (t^2 p (1-p)))) of the statistical
// fault-injection approach: population N, margin of error e, confidence
// coefficient t, estimated proportion p.
std::int64_t required_sample_size(std::int64_t population, double margin, double confidence_t,
                                  double p);

// Uniform fault location over all 8 * weight-count bits of the target layer.
// Double faults draw two distinct bit positions (same weight allowed).
FaultSpec sample_fault(const CampaignConfig& config, const NetworkModel& model,
                       SplitMix64& stream);

// The iterative reference campaign: repetitions x images independent
// inferences, each under a freshly sampled persistent weight fault, scored
// against golden traces. Deterministic for a given seed at any thread count.
FICampaignResult run_fi_campaign(const NetworkModel& model, const Dataset& data,
                                 const CampaignConfig& config, int threads = 1,
                                 GoldenCache* cache = nullptr);

}  // namespace appraiser
