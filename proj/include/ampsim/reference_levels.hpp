#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"

namespace ampsim {

// Price band a bid must fall in to count toward a unit's reference level.
struct EconomicBand {
    double low = 0.0;
    double high = 800.0;
};

inline constexpr int kDefaultRefWindowDays = 90;

// Quantity-weighted mean price of the unit's qualifying steps (ECONOMIC
// status, price inside the band, positive quantity) over the sliding window
// [t - window_days*24h, t). The hour t itself never contributes. Returns
// nullopt when no qualifying step exists in the window.
//
// `unit_offers` must contain only this unit's offers, sorted by hour; rows at
// or after t are ignored, so passing the unit's full history is fine.
std::optional<double> reference_level_at(std::span<const IncrementalOffer> unit_offers, HourId t,
                                         int window_days = kDefaultRefWindowDays,
                                         EconomicBand band = {});

// Hour-aligned reference-level series for every unit in the dataset. Values
// line up with Dataset::hours(); missing stays missing (no fill-in).
class ReferenceLevels {
  public:
    ReferenceLevels() = default;
    ReferenceLevels(std::vector<HourId> hours, std::vector<std::string> units,
                    std::vector<std::optional<double>> values);

    const std::vector<HourId>& hours() const { return hours_; }
    const std::vector<std::string>& units() const { return units_; }

    // nullopt when the unit is unknown, the hour is not in the series, or no
    // qualifying history exists.
    std::optional<double> at(const std::string& unit_id, HourId hour) const;

    // All units' values at one hour, keyed by unit id.
    std::map<std::string, std::optional<double>> row_at(HourId hour) const;

  private:
    std::vector<HourId> hours_;
    std::vector<std::string> units_;            // sorted
    std::vector<std::optional<double>> values_; // units_.size() x hours_.size(), unit-major
};

// Computes the rolling series for all units over the dataset's market hours.
// Deterministic for any thread count: units are partitioned statically and
// each unit's series is written to its own slot.
ReferenceLevels compute_reference_levels(const Dataset& data,
                                         int window_days = kDefaultRefWindowDays,
                                         EconomicBand band = {}, int threads = 1);

}  // namespace ampsim
