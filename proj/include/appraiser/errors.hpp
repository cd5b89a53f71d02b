#pragma once

#include <stdexcept>
#include <string>

namespace appraiser {

// Error categories map 1:1 to CLI exit codes; see README.
enum class ErrorCategory {
    Io,          // missing/unreadable/unwritable files
    Format,      // malformed manifests, tables, reports
    Shape,       // incompatible tensor/layer geometry
    Address,     // out-of-range bit address
    Config,      // invalid run configuration
    Comparison,  // misaligned inputs to a metric
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}
    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorCategory::Io, m) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error(ErrorCategory::Format, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorCategory::Shape, m) {}
};
struct AddressError : Error {
    explicit AddressError(const std::string& m) : Error(ErrorCategory::Address, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorCategory::Config, m) {}
};
struct ComparisonError : Error {
    explicit ComparisonError(const std::string& m) : Error(ErrorCategory::Comparison, m) {}
};

}  // namespace appraiser
