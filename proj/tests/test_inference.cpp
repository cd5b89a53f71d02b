#include "doctest.h"

#include <cmath>

#include "appraiser/inference.hpp"
#include "appraiser/parallel.hpp"
#include "test_support.hpp"

using namespace appraiser;

namespace {

LayerSpec conv_layer(QuantTensor weights, int shift, Activation act = Activation::ReLU) {
    return LayerSpec{"conv", LayerKind::Conv2D, std::move(weights), shift, act, 2};
}

LayerSpec fc_layer(QuantTensor weights, int shift) {
    return LayerSpec{"fc", LayerKind::FullyConnected, std::move(weights), shift,
                     Activation::None, 2};
}

LayerSpec pool_layer(int size = 2) {
    return LayerSpec{"pool", LayerKind::MaxPool, QuantTensor(), 0, Activation::None, size};
}

const MultiplierModel& exact() {
    static const MultiplierModel m = MultiplierModel::exact();
    return m;
}

std::shared_ptr<const MultiplierModel> shared_exact_lut() {
    std::vector<std::int16_t> t(65536);
    for (int a = -128; a <= 127; ++a) {
        for (int b = -128; b <= 127; ++b) {
            t[static_cast<std::size_t>((a + 128) * 256 + b + 128)] =
                static_cast<std::int16_t>(a * b);
        }
    }
    return std::make_shared<const MultiplierModel>(MultiplierModel::lut("exact_table", std::move(t)));
}

}  // namespace

TEST_CASE("conv2d 1x1 identity kernel applies requantization and relu") {
    const LayerSpec layer = conv_layer(QuantTensor({1, 1, 1, 1}, {1}), 0);
    const QuantTensor pos({1, 1, 1}, {55});
    const QuantTensor neg({1, 1, 1}, {-55});
    CHECK(conv2d_forward(pos, layer, exact(), 1.0)[0] == 55);
    CHECK(conv2d_forward(neg, layer, exact(), 1.0)[0] == 0);  // relu clamps
}

TEST_CASE("conv2d with all-zero weights yields all-zero output") {
    SplitMix64 rng(11);
    const auto input = testsupport::random_tensor(rng, {6, 6, 2});
    const LayerSpec layer = conv_layer(QuantTensor::zeros({3, 3, 2, 4}), 2);
    const QuantTensor out = conv2d_forward(input, layer, exact(), 1.0);
    for (std::int64_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == 0);
}

TEST_CASE("conv2d matches the triple-loop reference on seeded cases") {
    SplitMix64 rng(12);
    // the documented case: 6x6x1 input against 3x3x1x2 weights
    {
        const auto input = testsupport::random_tensor(rng, {6, 6, 1});
        const LayerSpec layer = conv_layer(testsupport::random_tensor(rng, {3, 3, 1, 2}), 4);
        CHECK(conv2d_forward(input, layer, exact(), 1.0) == testsupport::ref_conv2d(input, layer));
    }
    for (int i = 0; i < 100; ++i) {
        const std::int64_t ih = 3 + static_cast<std::int64_t>(rng.next_below(6));
        const std::int64_t iw = 3 + static_cast<std::int64_t>(rng.next_below(6));
        const std::int64_t ic = 1 + static_cast<std::int64_t>(rng.next_below(3));
        const std::int64_t oc = 1 + static_cast<std::int64_t>(rng.next_below(4));
        const std::int64_t k = 1 + static_cast<std::int64_t>(rng.next_below(3));
        const int shift = static_cast<int>(rng.next_below(9));
        const auto act = rng.next_below(2) ? Activation::ReLU : Activation::None;
        const auto input = testsupport::random_tensor(rng, {ih, iw, ic});
        const LayerSpec layer = conv_layer(testsupport::random_tensor(rng, {k, k, ic, oc}), shift, act);
        CAPTURE(i);
        REQUIRE(conv2d_forward(input, layer, exact(), 1.0) == testsupport::ref_conv2d(input, layer));
    }
}

TEST_CASE("conv2d rejects mismatched geometry") {
    SplitMix64 rng(13);
    const auto input = testsupport::random_tensor(rng, {4, 4, 2});
    CHECK_THROWS_AS(conv2d_forward(input, conv_layer(testsupport::random_tensor(rng, {3, 3, 1, 2}), 0),
                                   exact(), 1.0),
                    ShapeError);
    CHECK_THROWS_AS(conv2d_forward(input, conv_layer(testsupport::random_tensor(rng, {5, 5, 2, 2}), 0),
                                   exact(), 1.0),
                    ShapeError);
}

TEST_CASE("maxpool basics and reference agreement") {
    const QuantTensor w({2, 2, 1}, {1, 2, 3, 4});
    CHECK(maxpool_forward(w, pool_layer())[0] == 4);

    const QuantTensor c({4, 4, 1}, std::vector<std::int8_t>(16, 9));
    const QuantTensor pooled = maxpool_forward(c, pool_layer());
    CHECK(pooled.shape() == std::vector<std::int64_t>{2, 2, 1});
    for (std::int64_t i = 0; i < pooled.size(); ++i) REQUIRE(pooled[i] == 9);

    SplitMix64 rng(14);
    for (int i = 0; i < 100; ++i) {
        const std::int64_t h = 2 * (1 + static_cast<std::int64_t>(rng.next_below(4)));
        const std::int64_t w2 = 2 * (1 + static_cast<std::int64_t>(rng.next_below(4)));
        const std::int64_t c2 = 1 + static_cast<std::int64_t>(rng.next_below(4));
        const auto input = testsupport::random_tensor(rng, {h, w2, c2});
        REQUIRE(maxpool_forward(input, pool_layer()) == testsupport::ref_maxpool(input, 2));
    }

    CHECK_THROWS_AS(maxpool_forward(testsupport::random_tensor(rng, {5, 4, 1}), pool_layer()),
                    ShapeError);
}

TEST_CASE("fc identity pattern copies selected inputs") {
    const QuantTensor input({4}, {9, -7, 3, 100});
    // one +1 per row, picking inputs 3 and 1
    const LayerSpec layer = fc_layer(QuantTensor({2, 4}, {0, 0, 0, 1, 0, 1, 0, 0}), 0);
    const QuantTensor out = fc_forward(input, layer, exact(), 1.0);
    CHECK(out[0] == 100);
    CHECK(out[1] == -7);
}

TEST_CASE("fc zero input gives zero logits and matches the dot-product reference") {
    SplitMix64 rng(15);
    const LayerSpec layer = fc_layer(testsupport::random_tensor(rng, {3, 10}), 2);
    const QuantTensor zeros = QuantTensor::zeros({10});
    const QuantTensor out = fc_forward(zeros, layer, exact(), 1.0);
    for (std::int64_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == 0);

    for (int i = 0; i < 100; ++i) {
        const std::int64_t in_n = 1 + static_cast<std::int64_t>(rng.next_below(40));
        const std::int64_t out_n = 1 + static_cast<std::int64_t>(rng.next_below(5));
        const LayerSpec l = fc_layer(testsupport::random_tensor(rng, {out_n, in_n}),
                                     static_cast<int>(rng.next_below(8)));
        const auto input = testsupport::random_tensor(rng, {in_n});
        REQUIRE(fc_forward(input, l, exact(), 1.0) == testsupport::ref_fc(input, l));
    }

    CHECK_THROWS_AS(fc_forward(QuantTensor::zeros({9}), layer, exact(), 1.0), ShapeError);
}

TEST_CASE("partial substitution approximates exactly the first ceil(f*K) products") {
    SplitMix64 rng(16);
    const auto mult = MultiplierModel::truncated(5);
    for (double fraction : {0.0, 0.3, 0.5, 0.77, 1.0}) {
        const auto input = testsupport::random_tensor(rng, {5, 5, 2});
        const LayerSpec layer = conv_layer(testsupport::random_tensor(rng, {3, 3, 2, 2}), 3,
                                           Activation::None);
        const QuantTensor out = conv2d_forward(input, layer, mult, fraction);

        // independent reimplementation of the contract
        const auto& ws = layer.weights.shape();
        const std::int64_t K = ws[0] * ws[1] * ws[2];
        const auto boundary = static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(K)));
        const std::int64_t oh = 3, ow = 3;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                for (std::int64_t f = 0; f < 2; ++f) {
                    std::int64_t acc = 0, p = 0;
                    for (std::int64_t ky = 0; ky < 3; ++ky) {
                        for (std::int64_t kx = 0; kx < 3; ++kx) {
                            for (std::int64_t c = 0; c < 2; ++c, ++p) {
                                const auto w = layer.weights[((ky * 3 + kx) * 2 + c) * 2 + f];
                                const auto x = input[((oy + ky) * 5 + ox + kx) * 2 + c];
                                acc += p < boundary ? mult.mul(w, x)
                                                    : static_cast<std::int64_t>(w) * x;
                            }
                        }
                    }
                    REQUIRE(out[(oy * ow + ox) * 2 + f] == testsupport::ref_requantize(acc, 3));
                }
            }
        }
    }
}

TEST_CASE("run_inference is deterministic and ties break to the lowest class") {
    const Fixture fx = generate_fixture(42);
    const MultiplierBinding binding = MultiplierBinding::all_exact();
    const LayerTrace a = run_inference(fx.model, fx.data.images[0], binding);
    const LayerTrace b = run_inference(fx.model, fx.data.images[0], binding);
    REQUIRE(a.outputs.size() == fx.model.layers.size());
    for (std::size_t i = 0; i < a.outputs.size(); ++i) REQUIRE(a.outputs[i] == b.outputs[i]);
    CHECK(a.predicted == b.predicted);
    CHECK(a.logits == a.outputs.back());

    // identical logits: the lower class index wins
    NetworkModel tiny;
    tiny.input_shape = {1, 1, 2};
    tiny.layers.push_back(fc_layer(QuantTensor({2, 2}, {1, 0, 0, 1}), 0));
    tiny.layers.back().name = "FC";
    const LayerTrace t = run_inference(tiny, QuantTensor({1, 1, 2}, {33, 33}), binding);
    CHECK(t.logits[0] == 33);
    CHECK(t.logits[1] == 33);
    CHECK(t.predicted == 0);
}

TEST_CASE("a fault in Conv2 cannot disturb layers before it") {
    const Fixture fx = generate_fixture(42);
    const auto golden = golden_run(fx.model, fx.data);
    SplitMix64 rng(17);
    const std::int64_t weight_count = fx.model.layer("Conv2").weights.size();
    for (int i = 0; i < 50; ++i) {
        const FaultSpec fault{
            "Conv2",
            {BitAddress{static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(weight_count))),
                        static_cast<int>(rng.next_below(8))}}};
        const std::size_t img = rng.next_below(fx.data.images.size());
        const LayerTrace t =
            run_inference(fx.model, fx.data.images[img], MultiplierBinding::all_exact(), &fault);
        REQUIRE(t.outputs[0] == golden[img].outputs[0]);  // Conv1
        REQUIRE(t.outputs[1] == golden[img].outputs[1]);  // Pool1
    }
}

TEST_CASE("fault application equals a model whose weights were pre-mutated") {
    const Fixture fx = generate_fixture(21);
    SplitMix64 rng(18);
    for (int i = 0; i < 10; ++i) {
        const std::int64_t wc = fx.model.layer("Conv1").weights.size();
        const BitAddress addr{static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(wc))),
                              static_cast<int>(rng.next_below(8))};
        const FaultSpec fault{"Conv1", {addr}};

        NetworkModel mutated = fx.model;
        mutated.layers[0].weights = flip_bit(mutated.layers[0].weights, addr);

        const auto img = fx.data.images[i % fx.data.images.size()];
        const LayerTrace with_fault =
            run_inference(fx.model, img, MultiplierBinding::all_exact(), &fault);
        const LayerTrace pre_mutated = run_inference(mutated, img, MultiplierBinding::all_exact());
        for (std::size_t l = 0; l < with_fault.outputs.size(); ++l) {
            REQUIRE(with_fault.outputs[l] == pre_mutated.outputs[l]);
        }
        REQUIRE(with_fault.predicted == pre_mutated.predicted);
    }
}

TEST_CASE("fault validation") {
    const Fixture fx = generate_fixture(1);
    const MultiplierBinding binding = MultiplierBinding::all_exact();
    FaultSpec pool_fault{"Pool1", {BitAddress{0, 0}}};
    CHECK_THROWS_AS(run_inference(fx.model, fx.data.images[0], binding, &pool_fault), ConfigError);
    FaultSpec missing{"Nope", {BitAddress{0, 0}}};
    CHECK_THROWS_AS(run_inference(fx.model, fx.data.images[0], binding, &missing), ConfigError);
    FaultSpec oob{"Conv1", {BitAddress{fx.model.layer("Conv1").weights.size(), 0}}};
    CHECK_THROWS_AS(run_inference(fx.model, fx.data.images[0], binding, &oob), AddressError);
}

TEST_CASE("an exact-product lut substitution changes nothing bitwise") {
    const Fixture fx = generate_fixture(42);
    const auto golden = golden_run(fx.model, fx.data);
    MultiplierBinding lut_binding;
    lut_binding.bind("Conv1", shared_exact_lut(), 1.0);
    for (std::size_t img = 0; img < 8; ++img) {
        const LayerTrace t = run_inference(fx.model, fx.data.images[img], lut_binding);
        for (std::size_t l = 0; l < t.outputs.size(); ++l) {
            REQUIRE(t.outputs[l] == golden[img].outputs[l]);
        }
    }
}

TEST_CASE("fraction zero is bit-identical to all-exact for any multiplier") {
    const Fixture fx = generate_fixture(42);
    const auto golden = golden_run(fx.model, fx.data);
    MultiplierBinding binding;
    binding.bind("Conv2", std::make_shared<const MultiplierModel>(MultiplierModel::truncated(6)),
                 0.0);
    for (std::size_t img = 0; img < 8; ++img) {
        const LayerTrace t = run_inference(fx.model, fx.data.images[img], binding);
        for (std::size_t l = 0; l < t.outputs.size(); ++l) {
            REQUIRE(t.outputs[l] == golden[img].outputs[l]);
        }
    }
}

TEST_CASE("binding validation") {
    const Fixture fx = generate_fixture(1);
    MultiplierBinding unknown;
    unknown.bind("Nope", std::make_shared<const MultiplierModel>(MultiplierModel::truncated(1)));
    CHECK_THROWS_AS(unknown.validate(fx.model), ConfigError);

    MultiplierBinding pool;
    pool.bind("Pool1", std::make_shared<const MultiplierModel>(MultiplierModel::truncated(1)));
    CHECK_THROWS_AS(pool.validate(fx.model), ConfigError);

    MultiplierBinding bad_fraction;
    bad_fraction.bind("Conv1", std::make_shared<const MultiplierModel>(MultiplierModel::truncated(1)),
                      1.5);
    CHECK_THROWS_AS(bad_fraction.validate(fx.model), ConfigError);

    MultiplierBinding null_model;
    CHECK_THROWS_AS(null_model.bind("Conv1", nullptr), ConfigError);
}

TEST_CASE("default thread count comes from the environment") {
    setenv("APPRAISER_THREADS", "6", 1);
    CHECK(default_thread_count() == 6);
    setenv("APPRAISER_THREADS", "garbage", 1);
    CHECK(default_thread_count() == 1);
    unsetenv("APPRAISER_THREADS");
    CHECK(default_thread_count() == 1);
}

TEST_CASE("golden_run agrees with per-image inference and caches byte-stably") {
    const Fixture fx = generate_fixture(42);
    const auto direct = golden_run(fx.model, fx.data, 1);
    const auto threaded = golden_run(fx.model, fx.data, 2);
    REQUIRE(direct.size() == fx.data.images.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
        const LayerTrace one =
            run_inference(fx.model, fx.data.images[i], MultiplierBinding::all_exact());
        for (std::size_t l = 0; l < one.outputs.size(); ++l) {
            REQUIRE(direct[i].outputs[l] == one.outputs[l]);
            REQUIRE(threaded[i].outputs[l] == one.outputs[l]);
        }
    }

    GoldenCache cache;
    const auto& first = cache.get(fx.model, fx.data);
    const auto& second = cache.get(fx.model, fx.data);
    CHECK(&first == &second);  // memoized
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t l = 0; l < first[i].outputs.size(); ++l) {
            REQUIRE(first[i].outputs[l] == direct[i].outputs[l]);
        }
    }
}
