#include "appraiser/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace appraiser {

LayerErrorAccum::LayerErrorAccum(std::int64_t neuron_count)
    : neuron_count_(neuron_count),
      neuron_error_sums_(static_cast<std::size_t>(neuron_count), 0) {}

void LayerErrorAccum::add(const QuantTensor& observed, const QuantTensor& golden) {
    if (!observed.same_shape(golden) || observed.size() != neuron_count_) {
        throw ComparisonError("layer output shape does not match golden trace");
    }
    const auto o = observed.data();
    const auto g = golden.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const int err = static_cast<int>(g[i]) - static_cast<int>(o[i]);
        neuron_error_sums_[i] += err;
        ++value_counts_[static_cast<std::size_t>(err + 255)];
    }
    const BitMismatch m = count_bit_mismatches(observed, golden);
    mismatched_bits_ += m.mismatched;
    total_bits_ += m.total;
    ++runs_;
}

void LayerErrorAccum::merge(const LayerErrorAccum& other) {
    if (other.runs_ == 0) return;
    if (neuron_count_ == 0) {
        *this = other;
        return;
    }
    if (other.neuron_count_ != neuron_count_) {
        throw ComparisonError("cannot merge accumulators over different layers");
    }
    runs_ += other.runs_;
    mismatched_bits_ += other.mismatched_bits_;
    total_bits_ += other.total_bits_;
    for (std::size_t i = 0; i < neuron_error_sums_.size(); ++i) {
        neuron_error_sums_[i] += other.neuron_error_sums_[i];
    }
    for (std::size_t i = 0; i < value_counts_.size(); ++i) {
        value_counts_[i] += other.value_counts_[i];
    }
}

LayerMetrics LayerErrorAccum::finalize(const std::string& layer_name, int bins) const {
    LayerMetrics m;
    m.layer = layer_name;
    m.mismatched_bits = mismatched_bits_;
    m.total_bits = total_bits_;

    NormalizedErrorStats& s = m.error_stats;
    for (int v = -255; v <= 255; ++v) {
        if (v != 0 && value_counts_[static_cast<std::size_t>(v + 255)] > 0) {
            s.divisor = std::max<std::int64_t>(s.divisor, std::abs(v));
        }
    }
    s.histogram_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int j = 0; j <= bins; ++j) {
        s.histogram_edges[static_cast<std::size_t>(j)] = -1.0 + 2.0 * j / bins;
    }
    s.histogram_counts.assign(static_cast<std::size_t>(bins), 0);
    s.neuron_means.assign(static_cast<std::size_t>(neuron_count_), 0.0);
    if (s.divisor == 0 || runs_ == 0) return m;  // all outputs matched golden

    const double divisor = static_cast<double>(s.divisor);
    for (std::size_t i = 0; i < neuron_error_sums_.size(); ++i) {
        const double mean = static_cast<double>(neuron_error_sums_[i]) / static_cast<double>(runs_);
        s.neuron_means[i] = mean / divisor;
    }
    // bins are [edge_j, edge_j+1) with the last bin closed at +1
    for (int v = -255; v <= 255; ++v) {
        const std::int64_t count = value_counts_[static_cast<std::size_t>(v + 255)];
        if (count == 0) continue;
        const double x = static_cast<double>(v) / divisor;
        int bin = static_cast<int>(std::floor((x + 1.0) / 2.0 * bins));
        bin = std::clamp(bin, 0, bins - 1);
        s.histogram_counts[static_cast<std::size_t>(bin)] += count;
    }
    return m;
}

namespace {

std::size_t measured_layer_index(const std::string& measured_layer, const NetworkModel& model) {
    const int idx = model.layer_index(measured_layer);
    if (idx < 0) throw ConfigError("unknown measured layer '" + measured_layer + "'");
    return static_cast<std::size_t>(idx);
}

LayerErrorAccum accumulate_layer(std::size_t layer_idx, const NetworkModel& model,
                                 const std::vector<LayerTrace>& traces,
                                 const std::vector<LayerTrace>& golden) {
    if (traces.size() != golden.size()) {
        throw ComparisonError("trace lists differ in length");
    }
    (void)model;
    LayerErrorAccum accum;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const QuantTensor& observed = traces[i].outputs.at(layer_idx);
        if (accum.runs() == 0) accum = LayerErrorAccum(observed.size());
        accum.add(observed, golden[i].outputs.at(layer_idx));
    }
    return accum;
}

}  // namespace

NormalizedErrorStats normalized_error(const std::string& measured_layer, const NetworkModel& model,
                                      const std::vector<LayerTrace>& traces,
                                      const std::vector<LayerTrace>& golden) {
    const std::size_t idx = measured_layer_index(measured_layer, model);
    if (traces.empty()) throw ComparisonError("no traces to measure");
    return accumulate_layer(idx, model, traces, golden).finalize(measured_layer).error_stats;
}

double bitflip_percentage(const std::string& measured_layer, const NetworkModel& model,
                          const std::vector<LayerTrace>& traces,
                          const std::vector<LayerTrace>& golden) {
    const std::size_t idx = measured_layer_index(measured_layer, model);
    if (traces.empty()) throw ComparisonError("no traces to measure");
    return accumulate_layer(idx, model, traces, golden).finalize(measured_layer)
        .bitflip_percentage();
}

AccuracyRecall accuracy_recall(const std::vector<LayerTrace>& traces,
                               const std::vector<int>& labels, int class_count,
                               int positive_class) {
    if (traces.size() != labels.size()) {
        throw ComparisonError("traces and labels differ in length");
    }
    if (traces.empty()) throw ComparisonError("no predictions to score");
    if (positive_class < 0 || positive_class >= class_count) {
        throw ConfigError("positive class outside label range");
    }
    std::vector<std::int64_t> actual(static_cast<std::size_t>(class_count), 0);
    std::vector<std::int64_t> hits(static_cast<std::size_t>(class_count), 0);
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const int label = labels[i];
        ++actual[static_cast<std::size_t>(label)];
        if (traces[i].predicted == label) {
            ++correct;
            ++hits[static_cast<std::size_t>(label)];
        }
    }
    AccuracyRecall r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(traces.size());
    for (int c = 0; c < class_count; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        if (actual[idx] == 0) {
            r.recall_per_class.emplace_back(std::nullopt);  // undefined, not 0
        } else {
            r.recall_per_class.emplace_back(static_cast<double>(hits[idx]) /
                                            static_cast<double>(actual[idx]));
        }
    }
    r.recall = r.recall_per_class[static_cast<std::size_t>(positive_class)];
    return r;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> spearman_rank_agreement(const std::vector<double>& a,
                                              const std::vector<double>& b) {
    if (a.size() != b.size()) throw ComparisonError("rank agreement needs equal-length vectors");
    if (a.empty()) return std::nullopt;
    if (a == b) return 1.0;
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - mean_a;
        const double db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return std::nullopt;  // constant vector: undefined
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace appraiser
