#include "evdesnow/error.hpp"

namespace evdesnow {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::InvalidBins: return "InvalidBins";
    case ErrorCode::TimestampOverflow: return "TimestampOverflow";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::NegativeDepth: return "NegativeDepth";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::int64_t index)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

} // namespace evdesnow
