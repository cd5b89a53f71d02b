#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "appraiser/quant_tensor.hpp"

namespace appraiser {

enum class LayerKind { Conv2D, MaxPool, FullyConnected };
enum class Activation { None, ReLU };

const char* to_string(LayerKind k);
const char* to_string(Activation a);

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv2D;
    // Conv2D weights are [kh, kw, in_ch, out_ch]; FullyConnected weights are
    // [out_features, in_features]; MaxPool has none.
    QuantTensor weights;
    int requant_shift = 0;
    Activation activation = Activation::None;
    int pool_size = 2;

    bool has_weights() const { return kind != LayerKind::MaxPool; }
};

struct NetworkModel {
    std::vector<std::int64_t> input_shape;  // [h, w, c]
    std::vector<LayerSpec> layers;

    int layer_index(const std::string& name) const;           // -1 if absent
    const LayerSpec& layer(const std::string& name) const;    // throws ConfigError
};

struct Dataset {
    std::vector<QuantTensor> images;
    std::vector<int> labels;
    int class_count = 2;
    int positive_class = 1;
};

// Checks layer ordering, adjacent shape compatibility, requant shifts and the
// single-FC-output invariant; returns per-layer output shapes.
std::vector<std::vector<std::int64_t>> validate_model(const NetworkModel& model);

std::uint64_t model_checksum(const NetworkModel& model);
std::uint64_t dataset_checksum(const Dataset& data);

// On-disk format: a JSON manifest plus one raw little-endian int8 binary per
// weight tensor, row-major, checksummed. See docs/formats.md.
NetworkModel load_model(const std::filesystem::path& manifest_path);
void save_model(const NetworkModel& model, const std::filesystem::path& manifest_path);

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

// Deterministic test fixture: Conv 3x3x1x4 -> Pool 2x2 -> Conv 3x3x4x8 ->
// Pool 2x2 -> FC to 2 logits over 18x18 single-channel images, plus 64
// labeled synthetic images (bright blob upper-left = class 0, lower-right =
// class 1, with seeded noise). Weights are a fixed hand-assigned pattern with
// a small seeded jitter, so distinct seeds give distinct but equally usable
// models. Pure function of the seed.
struct Fixture {
    NetworkModel model;
    Dataset data;
};
Fixture generate_fixture(std::uint64_t seed);

}  // namespace appraiser
