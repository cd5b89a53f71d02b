#include "doctest.h"

#include <climits>

#include "appraiser/quant_tensor.hpp"
#include "test_support.hpp"

using namespace appraiser;

TEST_CASE("truncate_requantize fixed points and saturation") {
    for (int shift : {0, 1, 3, 7, 15, 31}) CHECK(truncate_requantize(0, shift) == 0);
    CHECK(truncate_requantize(300, 0) == 127);
    CHECK(truncate_requantize(-1024, 3) == -128);  // exactly at the boundary
    CHECK(truncate_requantize(-1032, 3) == -128);
    CHECK(truncate_requantize(127, 0) == 127);
    CHECK(truncate_requantize(128, 0) == 127);
    CHECK(truncate_requantize(-128, 0) == -128);
    CHECK(truncate_requantize(-129, 0) == -128);
    CHECK(truncate_requantize(INT32_MAX, 0) == 127);
    CHECK(truncate_requantize(INT32_MIN, 0) == -128);
    CHECK(truncate_requantize(INT32_MIN, 31) == -1);
}

TEST_CASE("truncate_requantize matches floor-division reference") {
    SplitMix64 rng(101);
    for (int i = 0; i < 20000; ++i) {
        const auto acc = static_cast<std::int32_t>(rng.next());
        const int shift = static_cast<int>(rng.next_below(32));
        CAPTURE(acc);
        CAPTURE(shift);
        REQUIRE(truncate_requantize(acc, shift) == testsupport::ref_requantize(acc, shift));
    }
}

TEST_CASE("truncate_requantize is monotone in the accumulator") {
    SplitMix64 rng(102);
    for (int i = 0; i < 5000; ++i) {
        const auto a = static_cast<std::int32_t>(rng.next());
        const auto b = static_cast<std::int32_t>(rng.next());
        const int shift = static_cast<int>(rng.next_below(32));
        const auto lo = std::min(a, b), hi = std::max(a, b);
        REQUIRE(truncate_requantize(lo, shift) <= truncate_requantize(hi, shift));
    }
}

TEST_CASE("flip_bit two's-complement semantics") {
    QuantTensor t({8}, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(flip_bit(t, {0, 7})[0] == -128);  // 0x00 -> 0x80
    CHECK(flip_bit(t, {4, 0})[4] == 5);     // LSB flip
    CHECK(flip_bit(t, {1, 1})[1] == 3);
    const QuantTensor f = flip_bit(t, {3, 5});
    BitMismatch m = count_bit_mismatches(t, f);
    CHECK(m.mismatched == 1);
}

TEST_CASE("flip_bit is an involution at every valid address") {
    SplitMix64 rng(103);
    for (int i = 0; i < 200; ++i) {
        const auto t = testsupport::random_tensor(rng, {4, static_cast<std::int64_t>(1 + rng.next_below(9))});
        const BitAddress addr{static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(t.size()))),
                              static_cast<int>(rng.next_below(8))};
        REQUIRE(flip_bit(flip_bit(t, addr), addr) == t);
    }
}

TEST_CASE("flip_bit rejects out-of-range addresses") {
    QuantTensor t({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(flip_bit(t, {4, 0}), AddressError);
    CHECK_THROWS_AS(flip_bit(t, {-1, 0}), AddressError);
    CHECK_THROWS_AS(flip_bit(t, {0, 8}), AddressError);
    CHECK_THROWS_AS(flip_bit(t, {0, -1}), AddressError);
}

TEST_CASE("count_bit_mismatches basics") {
    QuantTensor t({3, 5}, std::vector<std::int8_t>(15, 42));
    const BitMismatch same = count_bit_mismatches(t, t);
    CHECK(same.mismatched == 0);
    CHECK(same.total == 8 * 15);

    QuantTensor zero({1}, {0});
    QuantTensor minus1({1}, {-1});
    const BitMismatch all = count_bit_mismatches(zero, minus1);
    CHECK(all.mismatched == 8);  // 0x00 vs 0xFF
    CHECK(all.total == 8);

    CHECK_THROWS_AS(count_bit_mismatches(t, zero), ComparisonError);
}

TEST_CASE("count_bit_mismatches agrees with the per-bit loop and is symmetric") {
    SplitMix64 rng(104);
    for (int i = 0; i < 100; ++i) {
        const auto a = testsupport::random_tensor(rng, {100});
        const auto b = testsupport::random_tensor(rng, {100});
        const BitMismatch ab = count_bit_mismatches(a, b);
        const BitMismatch ba = count_bit_mismatches(b, a);
        REQUIRE(ab.mismatched == testsupport::ref_mismatched_bits(a, b));
        REQUIRE(ab.mismatched == ba.mismatched);
        REQUIRE(ab.total == 800);
        if (ab.mismatched == 0) REQUIRE(a == b);
    }
}

TEST_CASE("tensor construction validates shape") {
    CHECK_THROWS_AS(QuantTensor({3}, {1, 2}), ShapeError);
    CHECK_THROWS_AS(QuantTensor({0}, {}), ShapeError);
    CHECK_THROWS_AS(QuantTensor({2, -1}, {1, 2}), ShapeError);
    const QuantTensor z = QuantTensor::zeros({2, 3, 4});
    CHECK(z.size() == 24);
    CHECK(z.scale_shift() == 0);
}

TEST_CASE("tensor checksum reacts to single-bit changes") {
    SplitMix64 rng(105);
    const auto t = testsupport::random_tensor(rng, {64});
    const auto f = flip_bit(t, {17, 3});
    CHECK(tensor_checksum(t) != tensor_checksum(f));
    CHECK(tensor_checksum(t) == tensor_checksum(flip_bit(f, {17, 3})));
}
