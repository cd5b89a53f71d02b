#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "appraiser/errors.hpp"

namespace appraiser {

// Position of a single bit inside a tensor: element index plus bit position
// in the element's two's-complement byte (bit 7 = sign).
struct BitAddress {
    std::int64_t flat_index = 0;
    int bit_pos = 0;

    bool operator==(const BitAddress&) const = default;
};

// Shaped container of int8 values, row-major. The scale_shift records the
// power-of-two scale (value = stored * 2^-scale_shift) but is bookkeeping
// only: every computation in this project runs on the stored integers.
// Instances are immutable after construction; all operations on them are
// pure functions returning new tensors.
class QuantTensor {
public:
    QuantTensor() = default;
    QuantTensor(std::vector<std::int64_t> shape, std::vector<std::int8_t> data,
                int scale_shift = 0);

    static QuantTensor zeros(std::vector<std::int64_t> shape, int scale_shift = 0);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    int scale_shift() const { return scale_shift_; }
    std::span<const std::int8_t> data() const { return data_; }

    std::int8_t operator[](std::int64_t flat) const { return data_[static_cast<std::size_t>(flat)]; }

    bool same_shape(const QuantTensor& other) const { return shape_ == other.shape_; }
    bool operator==(const QuantTensor&) const = default;

private:
    std::vector<std::int64_t> shape_;
    std::vector<std::int8_t> data_;
    int scale_shift_ = 0;
};

// Arithmetic right shift of the 32-bit accumulator followed by saturation to
// [-128, 127]. Saturates, never wraps. shift must be in [0, 31].
inline std::int8_t truncate_requantize(std::int32_t acc, int shift) {
    const std::int32_t v = acc >> shift;
    if (v > 127) return 127;
    if (v < -128) return -128;
    return static_cast<std::int8_t>(v);
}

// Returns a copy of t with exactly one bit inverted.
QuantTensor flip_bit(const QuantTensor& t, const BitAddress& addr);

struct BitMismatch {
    std::int64_t mismatched = 0;
    std::int64_t total = 0;
};

// Per-element popcount(a XOR b), summed. Tensors must have identical shape.
BitMismatch count_bit_mismatches(const QuantTensor& a, const QuantTensor& b);

// FNV-1a 64-bit digest; used for weight-integrity checks and run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t tensor_checksum(const QuantTensor& t);
std::string checksum_hex(std::uint64_t digest);

}  // namespace appraiser
