#include "appraiser/multiplier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "appraiser/quant_tensor.hpp"

namespace appraiser {

namespace {

constexpr std::size_t kTableSize = 65536;
constexpr std::int32_t kMaxProduct = 16384;

std::vector<std::int16_t> behavior_table(const MultiplierModel& m) {
    std::vector<std::int16_t> t(kTableSize);
    for (int a = -128; a <= 127; ++a) {
        for (int b = -128; b <= 127; ++b) {
            t[static_cast<std::size_t>((a + 128) * 256 + b + 128)] =
                m.mul(static_cast<std::int8_t>(a), static_cast<std::int8_t>(b));
        }
    }
    return t;
}

std::filesystem::path checksum_sidecar(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p += ".fnv1a64";
    return p;
}

void write_checksum_sidecar(const std::filesystem::path& path, std::uint64_t digest) {
    std::ofstream out(checksum_sidecar(path));
    if (!out) throw IoError("cannot write " + checksum_sidecar(path).string());
    out << checksum_hex(digest) << "\n";
}

std::vector<std::uint8_t> table_bytes_le(const std::vector<std::int16_t>& table) {
    std::vector<std::uint8_t> bytes(table.size() * 2);
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto u = static_cast<std::uint16_t>(table[i]);
        bytes[2 * i] = static_cast<std::uint8_t>(u & 0xff);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
    }
    return bytes;
}

}  // namespace

const char* to_string(MultiplierKind k) {
    switch (k) {
        case MultiplierKind::Exact: return "exact";
        case MultiplierKind::Lut: return "lut";
        case MultiplierKind::Truncated: return "truncated";
    }
    return "?";
}

MultiplierModel MultiplierModel::exact() {
    MultiplierModel m;
    m.name_ = "exact";
    m.kind_ = MultiplierKind::Exact;
    return m;
}

MultiplierModel MultiplierModel::truncated(int dropped_lsbs) {
    if (dropped_lsbs < 0 || dropped_lsbs > 8) {
        throw ConfigError("truncated multiplier needs k in [0,8], got " +
                          std::to_string(dropped_lsbs));
    }
    MultiplierModel m;
    m.name_ = "truncated" + std::to_string(dropped_lsbs);
    m.kind_ = MultiplierKind::Truncated;
    m.dropped_lsbs_ = dropped_lsbs;
    m.lsb_mask_ = static_cast<std::uint8_t>(0xff << dropped_lsbs);
    return m;
}

MultiplierModel MultiplierModel::lut(std::string name, std::vector<std::int16_t> table) {
    if (table.size() != kTableSize) {
        throw FormatError("multiplier table for '" + name + "' has " +
                          std::to_string(table.size()) + " entries, expected 65536");
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i] < -kMaxProduct || table[i] > kMaxProduct) {
            throw FormatError("multiplier table for '" + name + "' entry " + std::to_string(i) +
                              " = " + std::to_string(table[i]) + " outside [-16384, 16384]");
        }
    }
    MultiplierModel m;
    m.name_ = std::move(name);
    m.kind_ = MultiplierKind::Lut;
    m.table_ = std::move(table);
    return m;
}

std::uint64_t MultiplierModel::checksum() const {
    const auto bytes = table_bytes_le(kind_ == MultiplierKind::Lut ? table_ : behavior_table(*this));
    return fnv1a64(bytes.data(), bytes.size());
}

ErrorProfile profile(const MultiplierModel& model) {
    std::int64_t sum_ed = 0;
    std::int64_t sum_ed2 = 0;
    std::int64_t sum_abs = 0;
    std::int64_t nonzero = 0;
    std::int32_t worst = 0;
    for (int a = -128; a <= 127; ++a) {
        for (int b = -128; b <= 127; ++b) {
            const std::int32_t exact = a * b;
            const std::int32_t approx =
                model.mul(static_cast<std::int8_t>(a), static_cast<std::int8_t>(b));
            const std::int32_t ed = exact - approx;
            sum_ed += ed;
            sum_ed2 += static_cast<std::int64_t>(ed) * ed;
            sum_abs += std::abs(ed);
            if (ed != 0) ++nonzero;
            worst = std::max(worst, std::abs(ed));
        }
    }
    const double n = 65536.0;
    ErrorProfile p;
    p.mae = static_cast<double>(sum_abs) / n;
    p.error_rate = static_cast<double>(nonzero) / n;
    const double mean = static_cast<double>(sum_ed) / n;
    const double mean_sq = static_cast<double>(sum_ed2) / n;
    p.var_ed = mean_sq - mean * mean;
    p.rms_ed = std::sqrt(mean_sq);
    p.worst_ed = worst;
    return p;
}

namespace {

MultiplierModel load_lut_binary(const std::filesystem::path& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open LUT file " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != kTableSize * 2) {
        throw FormatError("LUT file " + path.string() + " holds " + std::to_string(bytes.size()) +
                          " bytes, expected 131072");
    }
    std::vector<std::int16_t> table(kTableSize);
    for (std::size_t i = 0; i < kTableSize; ++i) {
        const auto lo = static_cast<std::uint8_t>(bytes[2 * i]);
        const auto hi = static_cast<std::uint8_t>(bytes[2 * i + 1]);
        table[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo) |
                                             (static_cast<std::uint16_t>(hi) << 8));
    }
    return MultiplierModel::lut(name, std::move(table));
}

MultiplierModel load_lut_csv(const std::filesystem::path& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open LUT file " + path.string());
    std::vector<std::int16_t> table(kTableSize, 0);
    std::vector<bool> seen(kTableSize, false);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (rows == 0 && line.rfind("a,b,", 0) == 0) continue;  // optional header
        long a = 0, b = 0, prod = 0;
        if (std::sscanf(line.c_str(), "%ld,%ld,%ld", &a, &b, &prod) != 3) {
            throw FormatError("LUT file " + path.string() + ": bad row '" + line + "'");
        }
        if (a < -128 || a > 127 || b < -128 || b > 127) {
            throw FormatError("LUT file " + path.string() + ": operands (" + std::to_string(a) +
                              "," + std::to_string(b) + ") outside int8 range");
        }
        if (prod < -kMaxProduct || prod > kMaxProduct) {
            throw FormatError("LUT file " + path.string() + ": product " + std::to_string(prod) +
                              " outside [-16384, 16384]");
        }
        const auto idx = static_cast<std::size_t>((a + 128) * 256 + b + 128);
        if (seen[idx]) {
            throw FormatError("LUT file " + path.string() + ": duplicate pair (" +
                              std::to_string(a) + "," + std::to_string(b) + ")");
        }
        seen[idx] = true;
        table[idx] = static_cast<std::int16_t>(prod);
        ++rows;
    }
    if (rows != kTableSize) {
        throw FormatError("LUT file " + path.string() + " holds " + std::to_string(rows) +
                          " rows, expected 65536");
    }
    return MultiplierModel::lut(name, std::move(table));
}

}  // namespace

MultiplierModel load_lut(const std::filesystem::path& path, const std::string& name) {
    MultiplierModel m = path.extension() == ".csv" ? load_lut_csv(path, name)
                                                   : load_lut_binary(path, name);
    const auto sidecar = checksum_sidecar(path);
    if (std::filesystem::exists(sidecar)) {
        std::ifstream in(sidecar);
        std::string expected;
        in >> expected;
        const std::string actual = checksum_hex(m.checksum());
        if (expected != actual) {
            throw FormatError("LUT file " + path.string() + " checksum " + actual +
                              " does not match sidecar value " + expected);
        }
    }
    return m;
}

void save_lut_binary(const MultiplierModel& model, const std::filesystem::path& path) {
    const auto bytes = table_bytes_le(behavior_table(model));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write LUT file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.close();
    write_checksum_sidecar(path, fnv1a64(bytes.data(), bytes.size()));
}

void save_lut_csv(const MultiplierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write LUT file " + path.string());
    out << "a,b,product\n";
    for (int a = -128; a <= 127; ++a) {
        for (int b = -128; b <= 127; ++b) {
            out << a << ',' << b << ','
                << model.mul(static_cast<std::int8_t>(a), static_cast<std::int8_t>(b)) << '\n';
        }
    }
    out.close();
    write_checksum_sidecar(path, model.checksum());
}

std::vector<RankedCandidate> rank_candidates(const std::vector<MultiplierModel>& models,
                                             double weight_var, double weight_rms) {
    if (weight_var < 0.0 || weight_rms < 0.0 || (weight_var == 0.0 && weight_rms == 0.0)) {
        throw ConfigError("ranking weights must be non-negative and not both zero");
    }
    std::vector<RankedCandidate> ranked;
    ranked.reserve(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        RankedCandidate c;
        c.model_index = i;
        c.name = models[i].name();
        c.error_profile = profile(models[i]);
        c.score = weight_var * c.error_profile.var_ed + weight_rms * c.error_profile.rms_ed;
        ranked.push_back(std::move(c));
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.name < b.name;
    });
    return ranked;
}

}  // namespace appraiser
