#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/inference.hpp"

namespace appraiser {

// Normalized-error statistics for one measured layer: integer errors
// golden - observed, normalized by the maximum |error| seen in that layer
// across the whole evaluated set.
struct NormalizedErrorStats {
    std::int64_t divisor = 0;              // max |error|; 0 means all outputs matched
    std::vector<double> neuron_means;      // per-neuron mean error / divisor
    std::vector<double> histogram_edges;   // bin_count+1 edges spanning [-1, 1]
    std::vector<std::int64_t> histogram_counts;

    static constexpr int kDefaultBins = 101;
};

struct LayerMetrics {
    std::string layer;
    std::int64_t mismatched_bits = 0;
    std::int64_t total_bits = 0;
    NormalizedErrorStats error_stats;

    double bitflip_percentage() const {
        return total_bits == 0 ? 0.0
                               : 100.0 * static_cast<double>(mismatched_bits) /
                                     static_cast<double>(total_bits);
    }
};

// Streaming accumulator over (observed, golden) output pairs of one layer.
// Keeps exact integer sufficient statistics (per-neuron error sums, a count
// per raw integer error value, bit mismatch counts), so campaigns never have
// to retain traces and merge order cannot change any result.
class LayerErrorAccum {
public:
    LayerErrorAccum() = default;
    explicit LayerErrorAccum(std::int64_t neuron_count);

    void add(const QuantTensor& observed, const QuantTensor& golden);
    void merge(const LayerErrorAccum& other);

    LayerMetrics finalize(const std::string& layer_name,
                          int bins = NormalizedErrorStats::kDefaultBins) const;

    std::int64_t runs() const { return runs_; }

private:
    std::int64_t neuron_count_ = 0;
    std::int64_t runs_ = 0;
    std::int64_t mismatched_bits_ = 0;
    std::int64_t total_bits_ = 0;
    std::vector<std::int64_t> neuron_error_sums_;
    // raw error values span [-255, 255]; index = value + 255
    std::array<std::int64_t, 511> value_counts_{};
};

// The three assessment metrics over aligned trace lists (one trace per image).
NormalizedErrorStats normalized_error(const std::string& measured_layer,
                                      const NetworkModel& model,
                                      const std::vector<LayerTrace>& traces,
                                      const std::vector<LayerTrace>& golden);
double bitflip_percentage(const std::string& measured_layer, const NetworkModel& model,
                          const std::vector<LayerTrace>& traces,
                          const std::vector<LayerTrace>& golden);

struct AccuracyRecall {
    double accuracy = 0.0;
    std::optional<double> recall;                      // for the positive class
    std::vector<std::optional<double>> recall_per_class;
};

AccuracyRecall accuracy_recall(const std::vector<LayerTrace>& traces,
                               const std::vector<int>& labels, int class_count,
                               int positive_class);

// Spearman rank correlation with average ranks for ties. Elementwise-equal
// vectors give exactly 1.0; a constant vector on either side (with unequal
// inputs) leaves the correlation undefined.
std::optional<double> spearman_rank_agreement(const std::vector<double>& a,
                                              const std::vector<double>& b);

}  // namespace appraiser
