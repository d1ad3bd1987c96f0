#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ampsim {

// All timestamps are hourly UTC. An HourId counts whole hours since
// 1970-01-01T00:00Z, so consecutive market hours differ by exactly 1 and the
// previous hour is always hour-1 regardless of calendar boundaries.
using HourId = std::int64_t;

inline constexpr int kHoursPerDay = 24;

// Accepts "YYYY-MM-DDTHH:00Z" (canonical) plus the tolerant variants
// "YYYY-MM-DDTHH:00" and "YYYY-MM-DDTHH:00:00Z". Minutes/seconds must be zero.
std::optional<HourId> try_parse_hour(std::string_view text);

// Same as try_parse_hour but throws AmpError{MalformedRow} on bad input.
HourId parse_hour(std::string_view text);

// Canonical form "YYYY-MM-DDTHH:00Z".
std::string format_hour(HourId hour);

}  // namespace ampsim
