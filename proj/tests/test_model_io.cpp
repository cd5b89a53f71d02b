#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "appraiser/model_io.hpp"
#include "test_support.hpp"

using namespace appraiser;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "appraiser_io_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("fixture generation is a pure function of the seed") {
    const Fixture a = generate_fixture(42);
    const Fixture b = generate_fixture(42);
    CHECK(model_checksum(a.model) == model_checksum(b.model));
    CHECK(dataset_checksum(a.data) == dataset_checksum(b.data));

    const Fixture c = generate_fixture(43);
    CHECK(a.model.layer("Conv1").weights != c.model.layer("Conv1").weights);
    CHECK(dataset_checksum(a.data) != dataset_checksum(c.data));
}

TEST_CASE("fixture serialization is byte-identical across runs") {
    const auto d1 = fresh_dir("fx1");
    const auto d2 = fresh_dir("fx2");
    save_model(generate_fixture(42).model, d1 / "model.json");
    save_model(generate_fixture(42).model, d2 / "model.json");
    for (const char* f : {"model.json", "Conv1.bin", "Conv2.bin", "FC.bin"}) {
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
    save_dataset(generate_fixture(7).data, d1 / "data");
    save_dataset(generate_fixture(7).data, d2 / "data");
    CHECK(slurp(d1 / "data" / "dataset.json") == slurp(d2 / "data" / "dataset.json"));
    CHECK(slurp(d1 / "data" / "images.bin") == slurp(d2 / "data" / "images.bin"));
}

TEST_CASE("fixture labels always contain both classes") {
    for (std::uint64_t seed : {1ULL, 42ULL, 43ULL, 999ULL, 123456789ULL}) {
        const Fixture fx = generate_fixture(seed);
        bool seen0 = false, seen1 = false;
        for (int label : fx.data.labels) {
            if (label == 0) seen0 = true;
            if (label == 1) seen1 = true;
        }
        CAPTURE(seed);
        CHECK(seen0);
        CHECK(seen1);
        CHECK(fx.data.images.size() >= 64);
        CHECK(fx.data.images.size() == fx.data.labels.size());
    }
}

TEST_CASE("model save/load round-trips byte-exactly") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto dir1 = fresh_dir("rt_a" + std::to_string(seed));
        const auto dir2 = fresh_dir("rt_b" + std::to_string(seed));
        const NetworkModel original = generate_fixture(seed).model;
        save_model(original, dir1 / "model.json");
        const NetworkModel reloaded = load_model(dir1 / "model.json");
        CHECK(model_checksum(reloaded) == model_checksum(original));
        save_model(reloaded, dir2 / "model.json");
        for (const char* f : {"model.json", "Conv1.bin", "Conv2.bin", "FC.bin"}) {
            CAPTURE(seed);
            CAPTURE(f);
            CHECK(slurp(dir1 / f) == slurp(dir2 / f));
        }
    }
}

TEST_CASE("model loader reports structured errors") {
    const auto dir = fresh_dir("loader");
    CHECK_THROWS_AS(load_model(dir / "absent.json"), IoError);

    {  // not json
        std::ofstream f(dir / "garbage.json");
        f << "not json at all {{{";
    }
    CHECK_THROWS_AS(load_model(dir / "garbage.json"), FormatError);

    // manifest declaring shape [3,3,1,4] over an 8-byte blob: 36 != 8
    {
        std::ofstream blob(dir / "Conv1.bin", std::ios::binary);
        const char bytes[8] = {0};
        blob.write(bytes, 8);
        std::ofstream f(dir / "model.json");
        f << R"({"format":"appraiser-model/1","input_shape":[18,18,1],"layers":[
             {"name":"Conv1","kind":"conv2d","requant_shift":8,"activation":"relu",
              "weights":{"file":"Conv1.bin","shape":[3,3,1,4],"checksum":"0"}}]})";
    }
    try {
        load_model(dir / "model.json");
        FAIL("expected a load error");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("Conv1") != std::string::npos);
        CHECK(msg.find("36") != std::string::npos);
        CHECK(msg.find("8") != std::string::npos);
    }

    // checksum mismatch names the tensor
    const auto good = fresh_dir("loader_ck");
    save_model(generate_fixture(5).model, good / "model.json");
    {
        std::fstream blob(good / "Conv2.bin", std::ios::in | std::ios::out | std::ios::binary);
        blob.seekp(10);
        blob.put(99);
    }
    try {
        load_model(good / "model.json");
        FAIL("expected a checksum error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("Conv2") != std::string::npos);
    }

    // reserved bias field must stay null
    const auto biased = fresh_dir("loader_bias");
    save_model(generate_fixture(5).model, biased / "model.json");
    {
        std::string manifest = slurp(biased / "model.json");
        const auto pos = manifest.find("\"bias\": null");
        REQUIRE(pos != std::string::npos);
        manifest.replace(pos, 12, "\"bias\": [1] ");
        std::ofstream f(biased / "model.json", std::ios::binary);
        f << manifest;
    }
    CHECK_THROWS_AS(load_model(biased / "model.json"), FormatError);
}

TEST_CASE("model validation catches broken geometry") {
    NetworkModel m = generate_fixture(11).model;
    SUBCASE("pool indivisibility") {
        m.input_shape = {17, 17, 1};  // conv -> 15x15, not poolable by 2
        CHECK_THROWS_AS(validate_model(m), ShapeError);
    }
    SUBCASE("fc input mismatch") {
        m.layers.back().weights = QuantTensor({2, 71}, std::vector<std::int8_t>(142, 1));
        CHECK_THROWS_AS(validate_model(m), ShapeError);
    }
    SUBCASE("fc must be last and unique") {
        m.layers.push_back(m.layers.back());
        m.layers.back().weights = QuantTensor({2, 2}, std::vector<std::int8_t>(4, 1));
        CHECK_THROWS_AS(validate_model(m), ShapeError);
    }
    SUBCASE("requant shift range") {
        m.layers[0].requant_shift = 32;
        CHECK_THROWS_AS(validate_model(m), ShapeError);
    }
    SUBCASE("channel mismatch") {
        m.layers[2].weights = QuantTensor({3, 3, 3, 8}, std::vector<std::int8_t>(216, 1));
        CHECK_THROWS_AS(validate_model(m), ShapeError);
    }
}

TEST_CASE("dataset save/load round-trips") {
    const auto dir = fresh_dir("dataset");
    const Dataset original = generate_fixture(9).data;
    save_dataset(original, dir);
    const Dataset reloaded = load_dataset(dir);
    CHECK(dataset_checksum(reloaded) == dataset_checksum(original));
    CHECK(reloaded.labels == original.labels);
    CHECK(reloaded.positive_class == original.positive_class);

    // tampering with the blob is caught
    {
        std::fstream blob(dir / "images.bin", std::ios::in | std::ios::out | std::ios::binary);
        blob.seekp(3);
        blob.put(77);
    }
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
}

TEST_CASE("manifest-declared checksums match the loaded tensors") {
    const auto dir = fresh_dir("checksums");
    save_model(generate_fixture(42).model, dir / "model.json");
    const std::string manifest = slurp(dir / "model.json");
    const NetworkModel m = load_model(dir / "model.json");
    for (const char* name : {"Conv1", "Conv2", "FC"}) {
        const std::string declared = checksum_hex(tensor_checksum(m.layer(name).weights));
        CAPTURE(name);
        CHECK(manifest.find(declared) != std::string::npos);
    }
}

TEST_CASE("layer lookup by name") {
    const NetworkModel m = generate_fixture(1).model;
    CHECK(m.layer_index("Conv1") == 0);
    CHECK(m.layer_index("Pool2") == 3);
    CHECK(m.layer_index("FC") == 4);
    CHECK(m.layer_index("nope") == -1);
    CHECK_THROWS_AS(m.layer("nope"), ConfigError);
    CHECK_FALSE(m.layer("Pool1").has_weights());
    CHECK(m.layer("Conv2").has_weights());
}
