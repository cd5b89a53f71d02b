#include "appraiser/appraise.hpp"

#include <chrono>
#include <thread>

namespace appraiser {

MultiplierBinding set_mode(const MultiplierBinding& binding, AnalysisMode mode,
                           const AppraiserConfig& config) {
    (void)binding;  // modes are absolute, so the previous binding never leaks through
    MultiplierBinding next = MultiplierBinding::all_exact();
    if (mode == AnalysisMode::Assessment) {
        if (!config.multiplier) throw ConfigError("assessment mode needs a multiplier model");
        next.bind(config.layer, config.multiplier, config.substitution_fraction);
    }
    return next;
}

AppraiserResult run_appraiser(const NetworkModel& model, const Dataset& data,
                              const AppraiserConfig& config, int threads,
                              GoldenCache* cache) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.images.empty()) throw ConfigError("assessment needs a non-empty dataset");
    const int affected = model.layer_index(config.layer);
    if (affected < 0) throw ConfigError("unknown target layer '" + config.layer + "'");
    if (!model.layers[static_cast<std::size_t>(affected)].has_weights()) {
        throw ConfigError("layer '" + config.layer + "' has no multipliers to substitute");
    }
    const MultiplierBinding binding =
        set_mode(MultiplierBinding::all_exact(), AnalysisMode::Assessment, config);
    binding.validate(model);

    GoldenCache local_cache;
    const std::vector<LayerTrace>& golden =
        (cache ? *cache : local_cache).get(model, data, threads);

    const std::int64_t images = static_cast<std::int64_t>(data.images.size());
    const std::size_t measured_count = model.layers.size() - static_cast<std::size_t>(affected);

    if (threads < 1) threads = 1;
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, images));
    std::vector<std::vector<LayerErrorAccum>> partial(
        static_cast<std::size_t>(workers), std::vector<LayerErrorAccum>(measured_count));
    std::vector<int> predicted(static_cast<std::size_t>(images), 0);

    auto run_image = [&](std::int64_t i, std::vector<LayerErrorAccum>& accums) {
        const LayerTrace trace =
            run_inference(model, data.images[static_cast<std::size_t>(i)], binding, nullptr);
        predicted[static_cast<std::size_t>(i)] = trace.predicted;
        const LayerTrace& gold = golden[static_cast<std::size_t>(i)];
        for (std::size_t m = 0; m < measured_count; ++m) {
            const std::size_t li = static_cast<std::size_t>(affected) + m;
            if (accums[m].runs() == 0) accums[m] = LayerErrorAccum(trace.outputs[li].size());
            accums[m].add(trace.outputs[li], gold.outputs[li]);
        }
    };

    if (workers <= 1) {
        for (std::int64_t i = 0; i < images; ++i) run_image(i, partial[0]);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (images + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::int64_t begin = w * chunk;
            const std::int64_t end = std::min(images, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&run_image, &partial, w, begin, end] {
                for (std::int64_t i = begin; i < end; ++i) {
                    run_image(i, partial[static_cast<std::size_t>(w)]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    std::vector<LayerErrorAccum> total(measured_count);
    for (const auto& p : partial) {
        for (std::size_t m = 0; m < measured_count; ++m) total[m].merge(p[m]);
    }

    // score predictions through the shared metric path
    std::vector<LayerTrace> scored(static_cast<std::size_t>(images));
    for (std::int64_t i = 0; i < images; ++i) {
        scored[static_cast<std::size_t>(i)].predicted = predicted[static_cast<std::size_t>(i)];
    }
    const AccuracyRecall observed =
        accuracy_recall(scored, data.labels, data.class_count, data.positive_class);

    AppraiserResult result;
    result.affected_layer = config.layer;
    result.multiplier_name = config.multiplier->name();
    result.substitution_fraction = config.substitution_fraction;
    result.image_count = images;
    result.inference_count = images;
    result.accuracy = observed.accuracy;
    result.recall = observed.recall;
    result.recall_per_class = observed.recall_per_class;
    result.golden = accuracy_recall(golden, data.labels, data.class_count, data.positive_class);
    for (std::size_t m = 0; m < measured_count; ++m) {
        const std::size_t li = static_cast<std::size_t>(affected) + m;
        result.layers.push_back(total[m].finalize(model.layers[li].name));
    }
    result.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace appraiser
