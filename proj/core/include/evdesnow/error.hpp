#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evdesnow {

enum class ErrorCode {
    OutOfBounds,
    InvalidWindow,
    InvalidBins,
    TimestampOverflow,
    SingularHomography,
    InvalidArgument,
    DimensionMismatch,
    GeometryMismatch,
    NegativeDepth,
    EmptyWindow,
    TooSmall,
    InvalidScene,
    BadMagic,
    BadVersion,
    TruncatedFile,
    CorruptRecord,
    UnsupportedFormat,
    DecodeError,
    IoError,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure in the library is reported through this type. `index()` carries
// the offending event/record index for OutOfBounds and CorruptRecord.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::int64_t index = -1);

    ErrorCode code() const noexcept { return code_; }
    std::int64_t index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::int64_t index_;
};

} // namespace evdesnow
