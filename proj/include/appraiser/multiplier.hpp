#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "appraiser/errors.hpp"

namespace appraiser {

enum class MultiplierKind { Exact, Lut, Truncated };

const char* to_string(MultiplierKind k);

// Behavioral model of an 8-bit signed multiplier: a total function
// int8 x int8 -> int16 with |product| <= 16384.
//
// Exact        computes a*b directly.
// Lut          replays a 65,536-entry table indexed (a+128)*256 + (b+128);
//              this is how externally characterized approximate units are
//              ingested.
// Truncated(k) zeroes the k low bits of each operand's two's-complement
//              byte before multiplying. Ships as a self-contained surrogate
//              family so every test runs without external table files.
class MultiplierModel {
public:
    static MultiplierModel exact();
    static MultiplierModel truncated(int dropped_lsbs);  // k in [0, 8]
    static MultiplierModel lut(std::string name, std::vector<std::int16_t> table);

    const std::string& name() const { return name_; }
    MultiplierKind kind() const { return kind_; }
    int dropped_lsbs() const { return dropped_lsbs_; }
    const std::vector<std::int16_t>& table() const { return table_; }

    std::int16_t mul(std::int8_t a, std::int8_t b) const {
        switch (kind_) {
            case MultiplierKind::Exact:
                return static_cast<std::int16_t>(static_cast<int>(a) * static_cast<int>(b));
            case MultiplierKind::Lut:
                return table_[static_cast<std::size_t>((static_cast<int>(a) + 128) * 256 +
                                                       static_cast<int>(b) + 128)];
            case MultiplierKind::Truncated: {
                const auto ta = static_cast<std::int8_t>(
                    static_cast<std::uint8_t>(a) & lsb_mask_);
                const auto tb = static_cast<std::int8_t>(
                    static_cast<std::uint8_t>(b) & lsb_mask_);
                return static_cast<std::int16_t>(static_cast<int>(ta) * static_cast<int>(tb));
            }
        }
        return 0;  // unreachable
    }

    std::uint64_t checksum() const;  // over the full 65,536-pair behavior

    bool operator==(const MultiplierModel&) const = default;

private:
    MultiplierModel() = default;

    std::string name_ = "exact";
    MultiplierKind kind_ = MultiplierKind::Exact;
    int dropped_lsbs_ = 0;
    std::uint8_t lsb_mask_ = 0xff;
    std::vector<std::int16_t> table_;
};

// Error-distance statistics over all 65,536 operand pairs with the uniform
// operand distribution. ED(a,b) = a*b - approx(a,b).
struct ErrorProfile {
    double mae = 0.0;         // mean |ED|
    double error_rate = 0.0;  // fraction of pairs with ED != 0
    double var_ed = 0.0;      // variance of ED
    double rms_ed = 0.0;      // sqrt(mean ED^2)
    std::int32_t worst_ed = 0;  // max |ED|
};

// Full 65,536-pair enumeration in fixed index order; all moments come from
// exact integer sums, so the result is byte-stable.
ErrorProfile profile(const MultiplierModel& model);

// Reads a 131,072-byte little-endian int16 binary table, or a CSV with one
// a,b,product row per operand pair (optional "a,b,product" header).
// Every product must lie in [-16384, 16384].
MultiplierModel load_lut(const std::filesystem::path& path, const std::string& name);

// Writers used by tests/fixtures; a <path>.fnv1a64 checksum file is emitted
// beside the table and verified by load_lut when present.
void save_lut_binary(const MultiplierModel& model, const std::filesystem::path& path);
void save_lut_csv(const MultiplierModel& model, const std::filesystem::path& path);

struct RankedCandidate {
    std::size_t model_index = 0;
    std::string name;
    double score = 0.0;
    ErrorProfile error_profile;
};

// Candidate selection: ascending weight_var*var_ed + weight_rms*rms_ed,
// ties broken by name. Weights must not both be zero.
std::vector<RankedCandidate> rank_candidates(const std::vector<MultiplierModel>& models,
                                             double weight_var, double weight_rms);

}  // namespace appraiser
