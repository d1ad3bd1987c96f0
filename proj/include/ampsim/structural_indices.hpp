#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"

namespace ampsim {

enum class ScoreKind { Rsi, Congestion };

// Which side of the cutoff counts as screened-in (treated). RSI screens low
// scores (supplier pivotal when the market can't clear without it); the
// congestion index screens high scores.
enum class TreatedSide { Leq, Geq };

const char* to_string(ScoreKind kind);
const char* to_string(TreatedSide side);

// How much of a MUST_RUN unit's output is treated as must-take (netted out of
// market supply): its full max_output, or the sum of its offered segments.
enum class MustTakeRule { MaxOutput, SegmentSum };

// Residual supply index for one firm:
//   (market supply - firm supply) / (load forecast + reserves).
// Throws ZeroDenominator when load+reserves <= 0 and NegativeInput when any
// supply argument is negative.
double rsi(double market_supply, double firm_supply, double load_forecast, double reserves);

// Supply aggregates for a single hour's offers. Market supply counts every
// available unit's max_output net of must-take energy; UNAVAILABLE units
// contribute nothing. Firm supply splits that same quantity by bidder.
struct HourSupply {
    double market_supply = 0.0;
    std::map<std::string, double> firm_supply_by_bidder;
};
HourSupply hour_supply(std::span<const IncrementalOffer> offers_at_hour,
                       MustTakeRule rule = MustTakeRule::MaxOutput);

// A score series holds one value per (hour, entity). Bidder-level series
// (RSI) carry a bidder_id per entry; market-level series (congestion) leave
// it empty.
struct ScoreSeries {
    ScoreKind kind = ScoreKind::Rsi;
    struct Entry {
        HourId hour;
        std::string bidder_id;  // empty for market-level scores
        double value;
    };
    std::vector<Entry> entries;  // sorted by (hour, bidder_id)
};

// Per-bidder RSI for every market hour in the dataset.
ScoreSeries market_rsi_series(const Dataset& data, MustTakeRule rule = MustTakeRule::MaxOutput);

// Load-weighted congestion cost ($/MWh) from one hour's area records:
//   sum_a (load_a / total_load) * shadow_price_a over non-excluded areas.
// Throws ZeroTotalLoad when no non-excluded load exists.
double congestion_index(std::span<const AreaRecord> areas);

// Congestion score for hour t computed from the records at t-1 (the index is
// published with a one-hour lag). Throws NoLaggedData when the dataset has no
// record exactly one hour before t.
double congestion_at(const Dataset& data, HourId t);

// Market-level lagged congestion series. Hours without a preceding record
// (the first hour, and hours after a gap) are omitted rather than invented.
ScoreSeries congestion_series(const Dataset& data);

}  // namespace ampsim
