#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/metrics.hpp"

namespace appraiser {

// Single-pass resilience assessment: route the compromised layer's
// multiplications through an approximate unit and score one inference per
// image against golden. No fault sampling, no iteration.
struct AppraiserConfig {
    std::string layer;
    std::shared_ptr<const MultiplierModel> multiplier;
    double substitution_fraction = 1.0;
};

struct AppraiserResult {
    std::string affected_layer;
    std::string multiplier_name;
    double substitution_fraction = 1.0;
    std::int64_t image_count = 0;
    std::int64_t inference_count = 0;  // always == image_count: the single-pass contract

    double accuracy = 0.0;
    std::optional<double> recall;
    std::vector<std::optional<double>> recall_per_class;

    AccuracyRecall golden;
    std::vector<LayerMetrics> layers;  // affected layer through the output layer

    double wall_ms = 0.0;  // measured; never serialized into reports
};

// The mode switch: Functional restores all-exact multipliers, Assessment
// applies the config's substitution. Pure and idempotent.
enum class AnalysisMode { Functional, Assessment };

MultiplierBinding set_mode(const MultiplierBinding& binding, AnalysisMode mode,
                           const AppraiserConfig& config);

AppraiserResult run_appraiser(const NetworkModel& model, const Dataset& data,
                              const AppraiserConfig& config, int threads = 1,
                              GoldenCache* cache = nullptr);

}  // namespace appraiser
