#include "appraiser/model_io.hpp"

#include <fstream>
#include <numeric>
#include <utility>

#include "json.hpp"

#include "appraiser/rng.hpp"

namespace appraiser {

namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "appraiser-model/1";
constexpr const char* kDatasetFormat = "appraiser-dataset/1";

std::int64_t product(const std::vector<std::int64_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

std::vector<std::int8_t> read_int8_file(const std::filesystem::path& path,
                                        const std::string& tensor_name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("tensor '" + tensor_name + "': cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return std::vector<std::int8_t>(bytes.begin(), bytes.end());
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write to " + path.string());
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid JSON in " + path.string());
    return j;
}

Activation parse_activation(const std::string& s, const std::string& ctx) {
    if (s == "relu") return Activation::ReLU;
    if (s == "none") return Activation::None;
    throw FormatError(ctx + ": unknown activation '" + s + "'");
}

}  // namespace

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::FullyConnected: return "fc";
    }
    return "?";
}

const char* to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "none";
}

int NetworkModel::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

const LayerSpec& NetworkModel::layer(const std::string& name) const {
    const int idx = layer_index(name);
    if (idx < 0) throw ConfigError("model has no layer named '" + name + "'");
    return layers[static_cast<std::size_t>(idx)];
}

std::vector<std::vector<std::int64_t>> validate_model(const NetworkModel& model) {
    if (model.input_shape.size() != 3) {
        throw ShapeError("model input shape must be [h, w, c]");
    }
    if (model.layers.empty()) throw ShapeError("model has no layers");
    std::vector<std::vector<std::int64_t>> shapes;
    std::vector<std::int64_t> cur = model.input_shape;
    int fc_count = 0;
    for (const LayerSpec& layer : model.layers) {
        switch (layer.kind) {
            case LayerKind::Conv2D: {
                if (cur.size() != 3) throw ShapeError(layer.name + ": conv input must be 3-d");
                const auto& w = layer.weights.shape();
                if (w.size() != 4) throw ShapeError(layer.name + ": conv weights must be [kh, kw, in, out]");
                if (w[2] != cur[2]) {
                    throw ShapeError(layer.name + ": weight input channels " + std::to_string(w[2]) +
                                     " != activation channels " + std::to_string(cur[2]));
                }
                if (w[0] > cur[0] || w[1] > cur[1]) {
                    throw ShapeError(layer.name + ": kernel larger than input");
                }
                if (layer.requant_shift < 0 || layer.requant_shift > 31) {
                    throw ShapeError(layer.name + ": requant_shift outside [0,31]");
                }
                cur = {cur[0] - w[0] + 1, cur[1] - w[1] + 1, w[3]};
                break;
            }
            case LayerKind::MaxPool: {
                if (cur.size() != 3) throw ShapeError(layer.name + ": pool input must be 3-d");
                const std::int64_t p = layer.pool_size;
                if (p < 1) throw ShapeError(layer.name + ": pool size must be positive");
                if (cur[0] % p != 0 || cur[1] % p != 0) {
                    throw ShapeError(layer.name + ": spatial dims " + std::to_string(cur[0]) + "x" +
                                     std::to_string(cur[1]) + " not divisible by pool size " +
                                     std::to_string(p));
                }
                cur = {cur[0] / p, cur[1] / p, cur[2]};
                break;
            }
            case LayerKind::FullyConnected: {
                const auto& w = layer.weights.shape();
                if (w.size() != 2) throw ShapeError(layer.name + ": fc weights must be [out, in]");
                if (w[1] != product(cur)) {
                    throw ShapeError(layer.name + ": fc input features " + std::to_string(w[1]) +
                                     " != flattened activation size " + std::to_string(product(cur)));
                }
                if (layer.requant_shift < 0 || layer.requant_shift > 31) {
                    throw ShapeError(layer.name + ": requant_shift outside [0,31]");
                }
                ++fc_count;
                cur = {w[0]};
                break;
            }
        }
        shapes.push_back(cur);
    }
    if (fc_count != 1 || model.layers.back().kind != LayerKind::FullyConnected) {
        throw ShapeError("model must end in exactly one fully-connected logits layer");
    }
    return shapes;
}

std::uint64_t model_checksum(const NetworkModel& model) {
    std::uint64_t h = fnv1a64(model.input_shape.data(),
                              model.input_shape.size() * sizeof(std::int64_t));
    for (const LayerSpec& layer : model.layers) {
        h = fnv1a64(layer.name.data(), layer.name.size(), h);
        const int meta[4] = {static_cast<int>(layer.kind), layer.requant_shift,
                             static_cast<int>(layer.activation), layer.pool_size};
        h = fnv1a64(meta, sizeof meta, h);
        if (layer.has_weights()) {
            const std::uint64_t wsum = tensor_checksum(layer.weights);
            h = fnv1a64(&wsum, sizeof wsum, h);
        }
    }
    return h;
}

std::uint64_t dataset_checksum(const Dataset& data) {
    const int meta[2] = {data.class_count, data.positive_class};
    std::uint64_t h = fnv1a64(meta, sizeof meta);
    h = fnv1a64(data.labels.data(), data.labels.size() * sizeof(int), h);
    for (const QuantTensor& img : data.images) {
        const std::uint64_t isum = tensor_checksum(img);
        h = fnv1a64(&isum, sizeof isum, h);
    }
    return h;
}

NetworkModel load_model(const std::filesystem::path& manifest_path) {
    const json j = read_json_file(manifest_path);
    if (j.value("format", "") != kModelFormat) {
        throw FormatError(manifest_path.string() + ": not an " + std::string(kModelFormat) +
                          " manifest");
    }
    const auto dir = manifest_path.parent_path();
    NetworkModel model;
    model.input_shape = j.at("input_shape").get<std::vector<std::int64_t>>();
    for (const json& lj : j.at("layers")) {
        LayerSpec layer;
        layer.name = lj.at("name").get<std::string>();
        const std::string kind = lj.at("kind").get<std::string>();
        if (lj.contains("bias") && !lj.at("bias").is_null()) {
            throw FormatError(layer.name + ": 'bias' is reserved and must be null");
        }
        if (kind == "maxpool") {
            layer.kind = LayerKind::MaxPool;
            layer.pool_size = lj.value("pool_size", 2);
        } else if (kind == "conv2d" || kind == "fc") {
            layer.kind = kind == "fc" ? LayerKind::FullyConnected : LayerKind::Conv2D;
            layer.requant_shift = lj.at("requant_shift").get<int>();
            layer.activation = parse_activation(lj.at("activation").get<std::string>(), layer.name);
            const json& wj = lj.at("weights");
            const auto shape = wj.at("shape").get<std::vector<std::int64_t>>();
            const auto file = wj.at("file").get<std::string>();
            auto data = read_int8_file(dir / file, layer.name);
            const std::int64_t expected = product(shape);
            if (expected != static_cast<std::int64_t>(data.size())) {
                throw FormatError("tensor '" + layer.name + "' (" + file + "): manifest shape needs " +
                                  std::to_string(expected) + " bytes, file holds " +
                                  std::to_string(data.size()));
            }
            layer.weights = QuantTensor(shape, std::move(data), wj.value("scale_shift", 0));
            const std::string declared = wj.at("checksum").get<std::string>();
            const std::string actual = checksum_hex(tensor_checksum(layer.weights));
            if (declared != actual) {
                throw FormatError("tensor '" + layer.name + "' (" + file + "): checksum " + actual +
                                  " does not match manifest value " + declared);
            }
        } else {
            throw FormatError(layer.name + ": unknown layer kind '" + kind + "'");
        }
        model.layers.push_back(std::move(layer));
    }
    validate_model(model);
    return model;
}

void save_model(const NetworkModel& model, const std::filesystem::path& manifest_path) {
    validate_model(model);
    const auto dir = manifest_path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    json j;
    j["format"] = kModelFormat;
    j["input_shape"] = model.input_shape;
    j["layers"] = json::array();
    for (const LayerSpec& layer : model.layers) {
        json lj;
        lj["name"] = layer.name;
        lj["kind"] = to_string(layer.kind);
        if (layer.kind == LayerKind::MaxPool) {
            lj["pool_size"] = layer.pool_size;
        } else {
            lj["requant_shift"] = layer.requant_shift;
            lj["activation"] = to_string(layer.activation);
            lj["bias"] = nullptr;  // reserved
            const std::string file = layer.name + ".bin";
            write_bytes(dir / file, layer.weights.data().data(), layer.weights.data().size());
            lj["weights"] = {{"file", file},
                             {"shape", layer.weights.shape()},
                             {"scale_shift", layer.weights.scale_shift()},
                             {"checksum", checksum_hex(tensor_checksum(layer.weights))}};
        }
        j["layers"].push_back(std::move(lj));
    }
    write_json_file(j, manifest_path);
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const json j = read_json_file(dir / "dataset.json");
    if (j.value("format", "") != kDatasetFormat) {
        throw FormatError((dir / "dataset.json").string() + ": not an " +
                          std::string(kDatasetFormat) + " manifest");
    }
    Dataset data;
    data.class_count = j.at("class_count").get<int>();
    data.positive_class = j.at("positive_class").get<int>();
    data.labels = j.at("labels").get<std::vector<int>>();
    const auto shape = j.at("image_shape").get<std::vector<std::int64_t>>();
    const auto count = j.at("count").get<std::int64_t>();
    if (count != static_cast<std::int64_t>(data.labels.size())) {
        throw FormatError("dataset: count " + std::to_string(count) + " != labels length " +
                          std::to_string(data.labels.size()));
    }
    if (data.positive_class < 0 || data.positive_class >= data.class_count) {
        throw FormatError("dataset: positive_class outside [0, class_count)");
    }
    for (int label : data.labels) {
        if (label < 0 || label >= data.class_count) {
            throw FormatError("dataset: label " + std::to_string(label) + " outside class range");
        }
    }
    const json& ij = j.at("images");
    const auto file = ij.at("file").get<std::string>();
    auto bytes = read_int8_file(dir / file, "images");
    const std::int64_t per_image = product(shape);
    if (static_cast<std::int64_t>(bytes.size()) != per_image * count) {
        throw FormatError("dataset images file holds " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(per_image * count));
    }
    const std::string actual = checksum_hex(fnv1a64(bytes.data(), bytes.size()));
    if (actual != ij.at("checksum").get<std::string>()) {
        throw FormatError("dataset images checksum mismatch");
    }
    for (std::int64_t i = 0; i < count; ++i) {
        std::vector<std::int8_t> img(bytes.begin() + i * per_image,
                                     bytes.begin() + (i + 1) * per_image);
        data.images.emplace_back(shape, std::move(img));
    }
    return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    if (data.images.empty()) throw ConfigError("refusing to save empty dataset");
    if (data.images.size() != data.labels.size()) {
        throw ConfigError("dataset images/labels length mismatch");
    }
    std::filesystem::create_directories(dir);
    const auto& shape = data.images.front().shape();
    std::vector<std::int8_t> bytes;
    for (const QuantTensor& img : data.images) {
        if (img.shape() != shape) throw ShapeError("dataset images must share one shape");
        bytes.insert(bytes.end(), img.data().begin(), img.data().end());
    }
    write_bytes(dir / "images.bin", bytes.data(), bytes.size());
    json j;
    j["format"] = kDatasetFormat;
    j["class_count"] = data.class_count;
    j["positive_class"] = data.positive_class;
    j["image_shape"] = shape;
    j["count"] = data.images.size();
    j["labels"] = data.labels;
    j["images"] = {{"file", "images.bin"},
                   {"checksum", checksum_hex(fnv1a64(bytes.data(), bytes.size()))}};
    write_json_file(j, dir / "dataset.json");
}

// ---------------------------------------------------------------------------
// Fixture generation
// ---------------------------------------------------------------------------

namespace {

constexpr std::int64_t kImageSide = 18;
constexpr int kImageCount = 64;

std::int8_t clamp_int8(int v) {
    if (v > 127) return 127;
    if (v < -128) return -128;
    return static_cast<std::int8_t>(v);
}

int jitter(SplitMix64& rng) { return static_cast<int>(rng.next_below(3)) - 1; }

QuantTensor make_conv1_weights(SplitMix64& rng) {
    // 4 filters: brightness integrator, horizontal edge, vertical edge,
    // center-surround. The integrator drives classification; the rest add
    // texture for the error-propagation metrics.
    std::vector<std::int8_t> w(3 * 3 * 1 * 4);
    auto at = [&](int ky, int kx, int oc) -> std::int8_t& { return w[(ky * 3 + kx) * 4 + oc]; };
    for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
            at(ky, kx, 0) = clamp_int8(20 + jitter(rng));
            at(ky, kx, 1) = clamp_int8((ky == 0 ? -12 : ky == 2 ? 12 : 0) + jitter(rng));
            at(ky, kx, 2) = clamp_int8((kx == 0 ? -12 : kx == 2 ? 12 : 0) + jitter(rng));
            at(ky, kx, 3) = clamp_int8((ky == 1 && kx == 1 ? 24 : -3) + jitter(rng));
        }
    }
    return QuantTensor({3, 3, 1, 4}, std::move(w));
}

QuantTensor make_conv2_weights(SplitMix64& rng) {
    // Every output filter reads the brightness channel strongly and the edge
    // channels weakly, with per-filter variation.
    std::vector<std::int8_t> w(3 * 3 * 4 * 8);
    std::size_t i = 0;
    for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
            for (int ic = 0; ic < 4; ++ic) {
                for (int oc = 0; oc < 8; ++oc) {
                    int base = ic == 0 ? 17 + 2 * (oc % 3) : (oc + ic + ky + kx) % 5 - 2;
                    w[i++] = clamp_int8(base + jitter(rng));
                }
            }
        }
    }
    return QuantTensor({3, 3, 4, 8}, std::move(w));
}

QuantTensor make_fc_weights(SplitMix64& rng) {
    // After Pool2 the map is 3x3x8. An upper-left blob concentrates at (0,0)
    // and a lower-right blob at (2,2); each logit contrasts those corners.
    std::vector<std::int8_t> w(2 * 72, 0);
    auto at = [&](int row, int y, int x, int c) -> std::int8_t& {
        return w[row * 72 + (y * 3 + x) * 8 + c];
    };
    for (int c = 0; c < 8; ++c) {
        at(0, 0, 0, c) = clamp_int8(20 + jitter(rng));
        at(0, 0, 1, c) = clamp_int8(8 + jitter(rng));
        at(0, 1, 0, c) = clamp_int8(8 + jitter(rng));
        at(0, 2, 2, c) = clamp_int8(-20 + jitter(rng));
        at(1, 2, 2, c) = clamp_int8(20 + jitter(rng));
        at(1, 2, 1, c) = clamp_int8(8 + jitter(rng));
        at(1, 1, 2, c) = clamp_int8(8 + jitter(rng));
        at(1, 0, 0, c) = clamp_int8(-20 + jitter(rng));
    }
    return QuantTensor({2, 72}, std::move(w));
}

QuantTensor make_image(SplitMix64& rng, int label) {
    // Two quadratic blobs over uniform noise: a main blob in the labeled
    // quadrant and a weaker distractor in the opposite one. The amplitude gap
    // varies per image, so part of the set sits near the decision boundary,
    // echoing a trained-but-imperfect classifier.
    const int main_idx = label == 0 ? 0 : 1;
    int cy[2], cx[2], amp[2];
    const int gap = 4 + static_cast<int>(rng.next_below(21));  // [4, 24]
    for (int q = 0; q < 2; ++q) {
        const int base = q == 0 ? 5 : 12;
        cy[q] = base + static_cast<int>(rng.next_below(5)) - 2;
        cx[q] = base + static_cast<int>(rng.next_below(5)) - 2;
    }
    amp[main_idx] = 56 + static_cast<int>(rng.next_below(41));  // [56, 96]
    amp[1 - main_idx] = amp[main_idx] - gap;
    std::vector<std::int8_t> px(kImageSide * kImageSide);
    for (std::int64_t y = 0; y < kImageSide; ++y) {
        for (std::int64_t x = 0; x < kImageSide; ++x) {
            int v = static_cast<int>(rng.next_below(41));
            for (int q = 0; q < 2; ++q) {
                const std::int64_t d2 = (y - cy[q]) * (y - cy[q]) + (x - cx[q]) * (x - cx[q]);
                v += std::max<std::int64_t>(0, amp[q] - 6 * d2);
            }
            px[y * kImageSide + x] = clamp_int8(v);
        }
    }
    return QuantTensor({kImageSide, kImageSide, 1}, std::move(px));
}

}  // namespace

Fixture generate_fixture(std::uint64_t seed) {
    Fixture fx;

    SplitMix64 conv1_rng(derive_stream_seed(seed, 1, 0));
    SplitMix64 conv2_rng(derive_stream_seed(seed, 1, 1));
    SplitMix64 fc_rng(derive_stream_seed(seed, 1, 2));

    fx.model.input_shape = {kImageSide, kImageSide, 1};
    fx.model.layers.push_back({"Conv1", LayerKind::Conv2D, make_conv1_weights(conv1_rng), 8,
                               Activation::ReLU, 2});
    fx.model.layers.push_back({"Pool1", LayerKind::MaxPool, QuantTensor(), 0, Activation::None, 2});
    fx.model.layers.push_back({"Conv2", LayerKind::Conv2D, make_conv2_weights(conv2_rng), 8,
                               Activation::ReLU, 2});
    fx.model.layers.push_back({"Pool2", LayerKind::MaxPool, QuantTensor(), 0, Activation::None, 2});
    fx.model.layers.push_back({"FC", LayerKind::FullyConnected, make_fc_weights(fc_rng), 7,
                               Activation::None, 2});
    validate_model(fx.model);

    fx.data.class_count = 2;
    fx.data.positive_class = 1;
    bool seen[2] = {false, false};
    for (int i = 0; i < kImageCount; ++i) {
        SplitMix64 rng(derive_stream_seed(seed, 2, static_cast<std::uint64_t>(i)));
        int label = static_cast<int>(rng.next_below(2));
        // keep recall defined: the last image takes the missing class if the
        // draw happened to be single-class
        if (i == kImageCount - 1 && !seen[1 - label]) label = 1 - label;
        seen[label] = true;
        fx.data.labels.push_back(label);
        fx.data.images.push_back(make_image(rng, label));
    }
    return fx;
}

}  // namespace appraiser
