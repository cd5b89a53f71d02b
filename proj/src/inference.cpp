#include "appraiser/inference.hpp"

#include <cmath>
#include <cstdlib>

#include "appraiser/parallel.hpp"

namespace appraiser {

int default_thread_count() {
    if (const char* env = std::getenv("APPRAISER_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

void MultiplierBinding::bind(const std::string& layer,
                             std::shared_ptr<const MultiplierModel> model, double fraction) {
    if (!model) throw ConfigError("binding for '" + layer + "' has no multiplier model");
    bound_[layer] = BoundMultiplier{std::move(model), fraction};
}

const BoundMultiplier* MultiplierBinding::find(const std::string& layer) const {
    const auto it = bound_.find(layer);
    return it == bound_.end() ? nullptr : &it->second;
}

void MultiplierBinding::validate(const NetworkModel& model) const {
    for (const auto& [name, bound] : bound_) {
        const int idx = model.layer_index(name);
        if (idx < 0) throw ConfigError("binding references unknown layer '" + name + "'");
        if (!model.layers[static_cast<std::size_t>(idx)].has_weights()) {
            throw ConfigError("layer '" + name + "' has no multipliers to substitute");
        }
        if (!(bound.fraction >= 0.0 && bound.fraction <= 1.0)) {
            throw ConfigError("substitution fraction for '" + name + "' outside [0,1]");
        }
    }
}

namespace {

const MultiplierModel& exact_multiplier() {
    static const MultiplierModel m = MultiplierModel::exact();
    return m;
}

std::int64_t approx_product_count(double fraction, std::int64_t mac_terms) {
    return static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(mac_terms)));
}

}  // namespace

QuantTensor conv2d_forward(const QuantTensor& input, const LayerSpec& layer,
                           const MultiplierModel& mult, double fraction) {
    const auto& is = input.shape();
    const auto& ws = layer.weights.shape();
    if (is.size() != 3 || ws.size() != 4 || ws[2] != is[2] || ws[0] > is[0] || ws[1] > is[1]) {
        throw ShapeError(layer.name + ": conv geometry mismatch");
    }
    const std::int64_t ih = is[0], iw = is[1], ic = is[2];
    const std::int64_t kh = ws[0], kw = ws[1], oc = ws[3];
    const std::int64_t oh = ih - kh + 1, ow = iw - kw + 1;
    const std::int64_t mac_terms = kh * kw * ic;
    const std::int64_t approx_count = approx_product_count(fraction, mac_terms);
    const auto x = input.data();
    const auto w = layer.weights.data();
    std::vector<std::int8_t> out(static_cast<std::size_t>(oh * ow * oc));

    for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
            for (std::int64_t f = 0; f < oc; ++f) {
                std::int32_t acc = 0;
                std::int64_t p = 0;
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t xbase = ((oy + ky) * iw + ox + kx) * ic;
                        const std::int64_t wbase = ((ky * kw + kx) * ic) * oc + f;
                        for (std::int64_t c = 0; c < ic; ++c, ++p) {
                            const std::int8_t wv = w[static_cast<std::size_t>(wbase + c * oc)];
                            const std::int8_t xv = x[static_cast<std::size_t>(xbase + c)];
                            acc += p < approx_count
                                       ? mult.mul(wv, xv)
                                       : static_cast<std::int32_t>(wv) * xv;
                        }
                    }
                }
                std::int8_t v = truncate_requantize(acc, layer.requant_shift);
                if (layer.activation == Activation::ReLU && v < 0) v = 0;
                out[static_cast<std::size_t>((oy * ow + ox) * oc + f)] = v;
            }
        }
    }
    return QuantTensor({oh, ow, oc}, std::move(out), input.scale_shift());
}

QuantTensor maxpool_forward(const QuantTensor& input, const LayerSpec& layer) {
    const auto& is = input.shape();
    const std::int64_t p = layer.pool_size;
    if (is.size() != 3 || p < 1 || is[0] % p != 0 || is[1] % p != 0) {
        throw ShapeError(layer.name + ": spatial dims not divisible by pool size");
    }
    const std::int64_t ih = is[0], iw = is[1], c = is[2];
    const std::int64_t oh = ih / p, ow = iw / p;
    const auto x = input.data();
    std::vector<std::int8_t> out(static_cast<std::size_t>(oh * ow * c));
    for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                std::int8_t m = -128;
                for (std::int64_t dy = 0; dy < p; ++dy) {
                    for (std::int64_t dx = 0; dx < p; ++dx) {
                        const auto v =
                            x[static_cast<std::size_t>(((oy * p + dy) * iw + ox * p + dx) * c + ch)];
                        if (v > m) m = v;
                    }
                }
                out[static_cast<std::size_t>((oy * ow + ox) * c + ch)] = m;
            }
        }
    }
    return QuantTensor({oh, ow, c}, std::move(out), input.scale_shift());
}

QuantTensor fc_forward(const QuantTensor& input, const LayerSpec& layer,
                       const MultiplierModel& mult, double fraction) {
    const auto& ws = layer.weights.shape();
    if (ws.size() != 2 || ws[1] != input.size()) {
        throw ShapeError(layer.name + ": fc dimension mismatch");
    }
    const std::int64_t out_features = ws[0], in_features = ws[1];
    const std::int64_t approx_count = approx_product_count(fraction, in_features);
    const auto x = input.data();
    const auto w = layer.weights.data();
    std::vector<std::int8_t> out(static_cast<std::size_t>(out_features));
    for (std::int64_t o = 0; o < out_features; ++o) {
        std::int32_t acc = 0;
        for (std::int64_t i = 0; i < in_features; ++i) {
            const std::int8_t wv = w[static_cast<std::size_t>(o * in_features + i)];
            const std::int8_t xv = x[static_cast<std::size_t>(i)];
            acc += i < approx_count ? mult.mul(wv, xv) : static_cast<std::int32_t>(wv) * xv;
        }
        std::int8_t v = truncate_requantize(acc, layer.requant_shift);
        if (layer.activation == Activation::ReLU && v < 0) v = 0;
        out[static_cast<std::size_t>(o)] = v;
    }
    return QuantTensor({out_features}, std::move(out), input.scale_shift());
}

LayerTrace run_inference(const NetworkModel& model, const QuantTensor& image,
                         const MultiplierBinding& binding, const FaultSpec* fault) {
    binding.validate(model);
    std::optional<QuantTensor> faulty_weights;
    int fault_layer = -1;
    if (fault) {
        fault_layer = model.layer_index(fault->layer);
        if (fault_layer < 0) throw ConfigError("fault targets unknown layer '" + fault->layer + "'");
        const LayerSpec& target = model.layers[static_cast<std::size_t>(fault_layer)];
        if (!target.has_weights()) {
            throw ConfigError("fault targets layer '" + fault->layer + "' which has no weights");
        }
        QuantTensor corrupted = target.weights;
        for (const BitAddress& addr : fault->bits) corrupted = flip_bit(corrupted, addr);
        faulty_weights = std::move(corrupted);
    }

    LayerTrace trace;
    QuantTensor current = image;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& layer = model.layers[li];
        if (layer.kind == LayerKind::MaxPool) {
            current = maxpool_forward(current, layer);
        } else {
            const LayerSpec* effective = &layer;
            LayerSpec patched;
            if (static_cast<int>(li) == fault_layer) {
                patched = layer;
                patched.weights = *faulty_weights;
                effective = &patched;
            }
            const BoundMultiplier* bound = binding.find(layer.name);
            const MultiplierModel& mult = bound ? *bound->model : exact_multiplier();
            const double fraction = bound ? bound->fraction : 1.0;
            current = layer.kind == LayerKind::Conv2D
                          ? conv2d_forward(current, *effective, mult, fraction)
                          : fc_forward(current, *effective, mult, fraction);
        }
        trace.outputs.push_back(current);
    }
    trace.logits = trace.outputs.back();
    int best = 0;
    for (std::int64_t i = 1; i < trace.logits.size(); ++i) {
        if (trace.logits[i] > trace.logits[best]) best = static_cast<int>(i);
    }
    trace.predicted = best;
    return trace;
}

std::vector<LayerTrace> golden_run(const NetworkModel& model, const Dataset& data, int threads) {
    validate_model(model);
    std::vector<LayerTrace> traces(data.images.size());
    const MultiplierBinding exact = MultiplierBinding::all_exact();
    parallel_for(static_cast<std::int64_t>(data.images.size()), threads, [&](std::int64_t i) {
        traces[static_cast<std::size_t>(i)] =
            run_inference(model, data.images[static_cast<std::size_t>(i)], exact, nullptr);
    });
    return traces;
}

const std::vector<LayerTrace>& GoldenCache::get(const NetworkModel& model, const Dataset& data,
                                                int threads) {
    const auto key = std::make_pair(model_checksum(model), dataset_checksum(data));
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_.emplace(key, golden_run(model, data, threads)).first;
    }
    return it->second;
}

}  // namespace appraiser
