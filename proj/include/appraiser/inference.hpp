#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/model_io.hpp"
#include "appraiser/multiplier.hpp"
#include "appraiser/quant_tensor.hpp"

namespace appraiser {

// One or two bit positions inside one layer's stored weights. Applied for a
// whole forward pass (the persistent stored-weight fault model) and reverted
// afterwards; the model itself is never mutated.
struct FaultSpec {
    std::string layer;
    std::vector<BitAddress> bits;
};

struct BoundMultiplier {
    std::shared_ptr<const MultiplierModel> model;
    double fraction = 1.0;  // share of each MAC's products routed to `model`

    // value comparison: two bindings are equal when they route the same
    // fraction through behaviorally identical multipliers
    bool operator==(const BoundMultiplier& other) const {
        if (fraction != other.fraction) return false;
        if (model == other.model) return true;
        return model && other.model && *model == *other.model;
    }
};

// Per-layer multiplier substitution; unbound layers compute exact products.
class MultiplierBinding {
public:
    static MultiplierBinding all_exact() { return MultiplierBinding{}; }

    void bind(const std::string& layer, std::shared_ptr<const MultiplierModel> model,
              double fraction = 1.0);
    const BoundMultiplier* find(const std::string& layer) const;
    bool empty() const { return bound_.empty(); }

    // Referenced layers must exist, carry weights, and have fraction in [0,1].
    void validate(const NetworkModel& model) const;

    bool operator==(const MultiplierBinding&) const = default;

private:
    std::map<std::string, BoundMultiplier> bound_;
};

struct LayerTrace {
    std::vector<QuantTensor> outputs;  // one per layer, model order
    QuantTensor logits;                // == outputs.back()
    int predicted = 0;                 // argmax, ties to the lowest class
};

// Forward operators. MAC accumulation is 32-bit with a fixed summation order
// (kernel row-major, then input channel), so every run is bit-reproducible.
// The first ceil(fraction*K) of each K-term MAC's products go through `mult`,
// the remainder are exact; operand order is mul(weight, activation).
QuantTensor conv2d_forward(const QuantTensor& input, const LayerSpec& layer,
                           const MultiplierModel& mult, double fraction = 1.0);
QuantTensor maxpool_forward(const QuantTensor& input, const LayerSpec& layer);
QuantTensor fc_forward(const QuantTensor& input, const LayerSpec& layer,
                       const MultiplierModel& mult, double fraction = 1.0);

LayerTrace run_inference(const NetworkModel& model, const QuantTensor& image,
                         const MultiplierBinding& binding, const FaultSpec* fault = nullptr);

// Fault-free all-exact traces for every image, parallel over images.
std::vector<LayerTrace> golden_run(const NetworkModel& model, const Dataset& data,
                                   int threads = 1);

// Memoizes golden traces keyed by (model, dataset) checksum.
class GoldenCache {
public:
    const std::vector<LayerTrace>& get(const NetworkModel& model, const Dataset& data,
                                       int threads = 1);

private:
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<LayerTrace>> cache_;
};

}  // namespace appraiser
