#pragma once

#include <stdexcept>
#include <string>

namespace ampsim {

// Error kinds surfaced by the library. Each maps to one failure mode of a
// specific operation; see the throwing site for context.
enum class Errc {
    MalformedRow,
    NonMonotoneSteps,
    SegmentCapExceeded,
    DuplicateSegment,
    UnknownUnit,
    ZeroDenominator,
    NegativeInput,
    NoLaggedData,
    ZeroTotalLoad,
    MissingReference,
    InvalidHours,
    InsufficientSupply,
    EmptyStack,
    RankDeficient,
    TooFewClusters,
    EmptySample,
    EmptyInput,
    InvalidFraction,
    InvalidSpec,
    MismatchedRuns,
    IoError,
    UsageError,
};

const char* errc_name(Errc code);

class AmpError : public std::runtime_error {
  public:
    AmpError(Errc code, const std::string& message);
    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace ampsim
