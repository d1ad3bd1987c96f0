#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ampsim/hours.hpp"

namespace ampsim {

// Segment-count caps of the two market designs we mirror. Loaders take the
// cap explicitly; these are the conventional values.
inline constexpr int kSegmentCapTenStep = 10;
inline constexpr int kSegmentCapTwelveStep = 12;

enum class OfferStatus { Economic, MustRun, Unavailable };

const char* to_string(OfferStatus status);
std::optional<OfferStatus> parse_status(std::string_view text);

// One step of a unit's incremental energy offer curve for one hour.
struct IncrementalOffer {
    HourId hour = 0;
    std::string unit_id;
    std::string bidder_id;
    int segment = 0;       // 1-based step index; prices nondecreasing in it
    double price = 0.0;    // $/MWh
    double quantity = 0.0; // MW offered on this step
    OfferStatus status = OfferStatus::Economic;
    double max_output = 0.0;  // MW nameplate-style cap for the unit
};

struct AreaRecord {
    std::string area_id;
    double load = 0.0;          // MWh
    double shadow_price = 0.0;  // $/MWh
    bool is_excluded = false;   // city-style areas left out of the index
};

struct MarketHourRecord {
    HourId hour = 0;
    double load_forecast = 0.0;  // MWh
    double reserves = 0.0;       // MWh
    double gas_price = 0.0;      // $/MMBtu
    std::vector<AreaRecord> areas;
};

struct Dataset {
    std::vector<IncrementalOffer> offers;   // sorted by (hour, unit_id, segment)
    std::vector<MarketHourRecord> market;   // sorted by hour, unique hours
    std::map<std::string, std::string> unit_to_bidder;
    int segment_cap = kSegmentCapTwelveStep;

    const MarketHourRecord* market_at(HourId hour) const;
    std::vector<HourId> hours() const;

    // Contiguous run of offers for one hour (offers are hour-sorted).
    std::span<const IncrementalOffer> offers_at(HourId hour) const;
};

// Loaders validate as they parse and throw AmpError: MalformedRow for any
// parse/shape problem, DuplicateSegment / SegmentCapExceeded /
// NonMonotoneSteps for offer-curve violations. Output is sorted.
std::vector<IncrementalOffer> load_offers_csv(const std::filesystem::path& path, int segment_cap);
std::vector<MarketHourRecord> load_market_csv(const std::filesystem::path& path);
std::map<HourId, std::vector<AreaRecord>> load_areas_csv(const std::filesystem::path& path);

void write_offers_csv(const std::filesystem::path& path, std::span<const IncrementalOffer> offers);
void write_market_csv(const std::filesystem::path& path,
                      std::span<const MarketHourRecord> market);
void write_areas_csv(const std::filesystem::path& path, std::span<const MarketHourRecord> market);

// Builds the Dataset from loaded parts; attaches areas when given, derives
// unit_to_bidder from the offers, and re-checks cross-file invariants.
Dataset assemble_dataset(std::vector<IncrementalOffer> offers,
                         std::vector<MarketHourRecord> market, int segment_cap,
                         const std::map<HourId, std::vector<AreaRecord>>* areas = nullptr);

// Highest-priced economic step with positive quantity; nullopt when the unit
// offered no such step this hour.
std::optional<double> max_economic_bid(std::span<const IncrementalOffer> unit_offers_at_hour);

// Soft consistency review for assembled datasets: issues that do not stop a
// run but that an operator should see (offers without a market hour, offered
// quantity above max_output, inconsistent unit->bidder rows, ...).
struct Finding {
    std::string location;  // "offers @ 2019-06-01T14:00Z unit U7" style
    std::string message;
};
std::vector<Finding> validate_dataset(const Dataset& data);

}  // namespace ampsim
