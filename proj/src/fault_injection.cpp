#include "appraiser/fault_injection.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace appraiser {

const char* to_string(FaultModel m) {
    return m == FaultModel::Single ? "single" : "double";
}

FaultModel parse_fault_model(const std::string& s) {
    if (s == "single") return FaultModel::Single;
    if (s == "double") return FaultModel::Double;
    throw ConfigError("unknown fault model '" + s + "' (expected single|double)");
}

std::int64_t required_sample_size(std::int64_t population, double margin, double confidence_t,
                                  double p) {
    if (population < 1) throw ConfigError("population must be positive");
    if (!(margin > 0.0 && margin < 1.0)) throw ConfigError("margin must lie in (0,1)");
    if (!(confidence_t > 0.0)) throw ConfigError("confidence coefficient must be positive");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("proportion must lie in (0,1)");
    const double n = static_cast<double>(population);
    const double denom =
        1.0 + margin * margin * (n - 1.0) / (confidence_t * confidence_t * p * (1.0 - p));
    const auto samples = static_cast<std::int64_t>(std::ceil(n / denom));
    return std::min(samples, population);
}

FaultSpec sample_fault(const CampaignConfig& config, const NetworkModel& model,
                       SplitMix64& stream) {
    const LayerSpec& layer = model.layer(config.layer);
    if (!layer.has_weights()) {
        throw ConfigError("layer '" + config.layer + "' has no weights to corrupt");
    }
    const std::uint64_t total_bits = static_cast<std::uint64_t>(layer.weights.size()) * 8;
    auto to_address = [](std::uint64_t bit) {
        return BitAddress{static_cast<std::int64_t>(bit / 8), static_cast<int>(bit % 8)};
    };
    FaultSpec fault;
    fault.layer = config.layer;
    const std::uint64_t first = stream.next_below(total_bits);
    fault.bits.push_back(to_address(first));
    if (config.fault_model == FaultModel::Double) {
        // without replacement over bit positions; the same weight may be hit twice
        std::uint64_t second = stream.next_below(total_bits - 1);
        if (second >= first) ++second;
        fault.bits.push_back(to_address(second));
    }
    return fault;
}

namespace {

// Lane tag separating batch-shared fault streams from per-image ones (image
// indices never reach 2^32).
constexpr std::uint64_t kBatchLane = std::uint64_t{1} << 32;

struct CampaignAccum {
    std::vector<LayerErrorAccum> layers;
    std::vector<std::int64_t> hits_per_class;  // correct predictions per label
    std::int64_t correct = 0;

    explicit CampaignAccum(std::size_t layer_count, int class_count)
        : layers(layer_count), hits_per_class(static_cast<std::size_t>(class_count), 0) {}

    void merge(const CampaignAccum& other) {
        for (std::size_t i = 0; i < layers.size(); ++i) layers[i].merge(other.layers[i]);
        for (std::size_t c = 0; c < hits_per_class.size(); ++c) {
            hits_per_class[c] += other.hits_per_class[c];
        }
        correct += other.correct;
    }
};

}  // namespace

FICampaignResult run_fi_campaign(const NetworkModel& model, const Dataset& data,
                                 const CampaignConfig& config, int threads,
                                 GoldenCache* cache) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.images.empty()) throw ConfigError("fault campaign needs a non-empty dataset");
    if (config.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    const int affected = model.layer_index(config.layer);
    if (affected < 0) throw ConfigError("unknown target layer '" + config.layer + "'");
    if (!model.layers[static_cast<std::size_t>(affected)].has_weights()) {
        throw ConfigError("layer '" + config.layer + "' has no weights to corrupt");
    }

    GoldenCache local_cache;
    const std::vector<LayerTrace>& golden =
        (cache ? *cache : local_cache).get(model, data, threads);

    const std::int64_t images = static_cast<std::int64_t>(data.images.size());
    const std::int64_t reps = config.repetitions;
    const std::int64_t tasks = reps * images;
    const std::size_t measured_count = model.layers.size() - static_cast<std::size_t>(affected);
    const MultiplierBinding exact = MultiplierBinding::all_exact();

    std::vector<std::int64_t> actual_per_class(static_cast<std::size_t>(data.class_count), 0);
    for (int label : data.labels) ++actual_per_class[static_cast<std::size_t>(label)];

    if (threads < 1) threads = 1;
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, tasks));
    std::vector<CampaignAccum> partial(static_cast<std::size_t>(workers),
                                       CampaignAccum(measured_count, data.class_count));

    auto run_task = [&](std::int64_t task, CampaignAccum& accum) {
        const std::int64_t r = task / images;
        const std::int64_t i = task % images;
        const std::uint64_t lane = config.per_image_independent
                                       ? static_cast<std::uint64_t>(i)
                                       : kBatchLane;
        SplitMix64 stream(derive_stream_seed(config.seed, static_cast<std::uint64_t>(r), lane));
        const FaultSpec fault = sample_fault(config, model, stream);
        const LayerTrace trace =
            run_inference(model, data.images[static_cast<std::size_t>(i)], exact, &fault);
        const LayerTrace& gold = golden[static_cast<std::size_t>(i)];
        for (std::size_t m = 0; m < measured_count; ++m) {
            const std::size_t li = static_cast<std::size_t>(affected) + m;
            if (accum.layers[m].runs() == 0) {
                accum.layers[m] = LayerErrorAccum(trace.outputs[li].size());
            }
            accum.layers[m].add(trace.outputs[li], gold.outputs[li]);
        }
        const int label = data.labels[static_cast<std::size_t>(i)];
        if (trace.predicted == label) {
            ++accum.correct;
            ++accum.hits_per_class[static_cast<std::size_t>(label)];
        }
    };

    if (workers <= 1) {
        for (std::int64_t t = 0; t < tasks; ++t) run_task(t, partial[0]);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (tasks + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::int64_t begin = w * chunk;
            const std::int64_t end = std::min(tasks, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&run_task, &partial, w, begin, end] {
                for (std::int64_t t = begin; t < end; ++t) run_task(t, partial[static_cast<std::size_t>(w)]);
            });
        }
        for (auto& t : pool) t.join();
    }

    // all statistics are exact integers, so merge order is immaterial
    CampaignAccum total(measured_count, data.class_count);
    for (const CampaignAccum& p : partial) total.merge(p);

    FICampaignResult result;
    result.affected_layer = config.layer;
    result.fault_model = config.fault_model;
    result.repetitions = config.repetitions;
    result.seed = config.seed;
    result.per_image_independent = config.per_image_independent;
    result.image_count = images;
    result.inference_count = tasks;
    result.golden = accuracy_recall(golden, data.labels, data.class_count, data.positive_class);
    result.mean_accuracy =
        static_cast<double>(total.correct) / static_cast<double>(tasks);
    for (int c = 0; c < data.class_count; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        if (actual_per_class[idx] == 0) {
            result.mean_recall_per_class.emplace_back(std::nullopt);
        } else {
            // mean over repetitions of per-repetition recall; exact because
            // every repetition sees the same class counts
            result.mean_recall_per_class.emplace_back(
                static_cast<double>(total.hits_per_class[idx]) /
                (static_cast<double>(actual_per_class[idx]) * static_cast<double>(reps)));
        }
    }
    result.mean_recall = result.mean_recall_per_class[static_cast<std::size_t>(data.positive_class)];
    for (std::size_t m = 0; m < measured_count; ++m) {
        const std::size_t li = static_cast<std::size_t>(affected) + m;
        result.layers.push_back(total.layers[m].finalize(model.layers[li].name));
    }
    result.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace appraiser
