#include "appraiser/quant_tensor.hpp"

#include <bit>
#include <cstdio>
#include <string>

namespace appraiser {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
        n *= d;
    }
    return n;
}

}  // namespace

QuantTensor::QuantTensor(std::vector<std::int64_t> shape, std::vector<std::int8_t> data,
                         int scale_shift)
    : shape_(std::move(shape)), data_(std::move(data)), scale_shift_(scale_shift) {
    const std::int64_t expected = shape_product(shape_);
    if (expected != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape product " + std::to_string(expected));
    }
    if (scale_shift_ < 0) throw ShapeError("scale_shift must be non-negative");
}

QuantTensor QuantTensor::zeros(std::vector<std::int64_t> shape, int scale_shift) {
    const std::int64_t n = shape_product(shape);
    return QuantTensor(std::move(shape), std::vector<std::int8_t>(static_cast<std::size_t>(n), 0),
                       scale_shift);
}

QuantTensor flip_bit(const QuantTensor& t, const BitAddress& addr) {
    if (addr.flat_index < 0 || addr.flat_index >= t.size()) {
        throw AddressError("bit address element " + std::to_string(addr.flat_index) +
                           " out of range for tensor of " + std::to_string(t.size()) + " elements");
    }
    if (addr.bit_pos < 0 || addr.bit_pos > 7) {
        throw AddressError("bit position " + std::to_string(addr.bit_pos) + " outside [0,7]");
    }
    std::vector<std::int8_t> data(t.data().begin(), t.data().end());
    auto& e = data[static_cast<std::size_t>(addr.flat_index)];
    e = std::bit_cast<std::int8_t>(static_cast<std::uint8_t>(
        std::bit_cast<std::uint8_t>(e) ^ (1u << addr.bit_pos)));
    return QuantTensor(t.shape(), std::move(data), t.scale_shift());
}

BitMismatch count_bit_mismatches(const QuantTensor& a, const QuantTensor& b) {
    if (!a.same_shape(b)) {
        throw ComparisonError("bit comparison requires identical shapes");
    }
    BitMismatch m;
    m.total = 8 * a.size();
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        m.mismatched += std::popcount(static_cast<std::uint8_t>(
            std::bit_cast<std::uint8_t>(da[i]) ^ std::bit_cast<std::uint8_t>(db[i])));
    }
    return m;
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t tensor_checksum(const QuantTensor& t) {
    std::uint64_t h = fnv1a64(t.shape().data(), t.shape().size() * sizeof(std::int64_t));
    return fnv1a64(t.data().data(), t.data().size(), h);
}

std::string checksum_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf);
}

}  // namespace appraiser
