#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsctl {

enum class ErrorCode {
    Shape,        // E_SHAPE
    Rates,        // E_RATES
    Blowup,       // E_BLOWUP
    Eig,          // E_EIG
    Step,         // E_STEP
    NonFinite,    // E_NAN
    Unbounded,    // E_UNBOUNDED
    Degenerate,   // E_DEGENERATE
    MaxIter,      // E_MAXITER
    Config,       // E_CONFIG
    Io,           // E_IO
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Shape: return "E_SHAPE";
        case ErrorCode::Rates: return "E_RATES";
        case ErrorCode::Blowup: return "E_BLOWUP";
        case ErrorCode::Eig: return "E_EIG";
        case ErrorCode::Step: return "E_STEP";
        case ErrorCode::NonFinite: return "E_NAN";
        case ErrorCode::Unbounded: return "E_UNBOUNDED";
        case ErrorCode::Degenerate: return "E_DEGENERATE";
        case ErrorCode::MaxIter: return "E_MAXITER";
        case ErrorCode::Config: return "E_CONFIG";
        case ErrorCode::Io: return "E_IO";
    }
    return "E_UNKNOWN";
}

/// Library error carrying one of the documented error codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

}  // namespace rsctl
