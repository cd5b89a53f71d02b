#include "appraiser/errors.hpp"

namespace appraiser {

const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Format: return "format";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::Address: return "address";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Comparison: return "comparison";
    }
    return "?";
}

}  // namespace appraiser
