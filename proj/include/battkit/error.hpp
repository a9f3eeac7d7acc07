#pragma once

#include <stdexcept>
#include <string>

namespace battkit {

// Every failure mode in the toolkit has a named code so the CLI can map it
// to a stable exit class and emit machine-readable error JSON.
enum class ErrorCode {
    // config / usage
    InvalidConfig,
    UnknownConfigKey,
    // dataset
    MalformedRow,
    NonMonotonicTime,
    EmptyDataset,
    SegmentationFailure,
    NonPositiveNominal,
    // featurize
    DegenerateSegment,
    ZeroCurrentDelta,
    EmptyFitSet,
    TooFewSamples,
    // neural
    NonFiniteLoss,
    // transfer
    WindowOutOfRange,
    ZeroSourceRate,
    SourceHorizonExhausted,
    // verify
    InsufficientSourceData,
    LengthMismatch,
    ZeroDenominator,
    IllConditionedFit,
    // interpret
    EmptyWindow,
    AllZeroImportance,
    EmptySample,
    TooFewCycles,
    NonPositiveRate,
    // econ
    MissingPrice,
    MissingIntensity,
    IncompleteRoute,
    DegenerateAnchors,
    // simulate
    SocOutOfRange,
    // generic
    IoError,
};

const char* error_code_name(ErrorCode code);

// Exit class for the CLI: 1 = config error, 2 = data error, 3 = numerical failure.
int error_exit_class(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    const char* code_name() const noexcept { return error_code_name(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace battkit
