#include "battkit/error.hpp"

namespace battkit {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::UnknownConfigKey: return "UnknownConfigKey";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SegmentationFailure: return "SegmentationFailure";
        case ErrorCode::NonPositiveNominal: return "NonPositiveNominal";
        case ErrorCode::DegenerateSegment: return "DegenerateSegment";
        case ErrorCode::ZeroCurrentDelta: return "ZeroCurrentDelta";
        case ErrorCode::EmptyFitSet: return "EmptyFitSet";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorCode::ZeroSourceRate: return "ZeroSourceRate";
        case ErrorCode::SourceHorizonExhausted: return "SourceHorizonExhausted";
        case ErrorCode::InsufficientSourceData: return "InsufficientSourceData";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::IllConditionedFit: return "IllConditionedFit";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::AllZeroImportance: return "AllZeroImportance";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::TooFewCycles: return "TooFewCycles";
        case ErrorCode::NonPositiveRate: return "NonPositiveRate";
        case ErrorCode::MissingPrice: return "MissingPrice";
        case ErrorCode::MissingIntensity: return "MissingIntensity";
        case ErrorCode::IncompleteRoute: return "IncompleteRoute";
        case ErrorCode::DegenerateAnchors: return "DegenerateAnchors";
        case ErrorCode::SocOutOfRange: return "SocOutOfRange";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

int error_exit_class(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::UnknownConfigKey:
            return 1;
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::IllConditionedFit:
        case ErrorCode::ZeroDenominator:
        case ErrorCode::ZeroSourceRate:
        case ErrorCode::SocOutOfRange:
        case ErrorCode::AllZeroImportance:
            return 3;
        default:
            return 2;
    }
}

} // namespace battkit
