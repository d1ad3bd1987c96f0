#include "ampsim/errors.hpp"

namespace ampsim {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::MalformedRow: return "MalformedRow";
        case Errc::NonMonotoneSteps: return "NonMonotoneSteps";
        case Errc::SegmentCapExceeded: return "SegmentCapExceeded";
        case Errc::DuplicateSegment: return "DuplicateSegment";
        case Errc::UnknownUnit: return "UnknownUnit";
        case Errc::ZeroDenominator: return "ZeroDenominator";
        case Errc::NegativeInput: return "NegativeInput";
        case Errc::NoLaggedData: return "NoLaggedData";
        case Errc::ZeroTotalLoad: return "ZeroTotalLoad";
        case Errc::MissingReference: return "MissingReference";
        case Errc::InvalidHours: return "InvalidHours";
        case Errc::InsufficientSupply: return "InsufficientSupply";
        case Errc::EmptyStack: return "EmptyStack";
        case Errc::RankDeficient: return "RankDeficient";
        case Errc::TooFewClusters: return "TooFewClusters";
        case Errc::EmptySample: return "EmptySample";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::InvalidFraction: return "InvalidFraction";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::MismatchedRuns: return "MismatchedRuns";
        case Errc::IoError: return "IoError";
        case Errc::UsageError: return "UsageError";
    }
    return "Unknown";
}

AmpError::AmpError(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) {
    throw AmpError(code, message);
}

}  // namespace ampsim
