#include "ampsim/structural_indices.hpp"

#include <algorithm>

#include "ampsim/errors.hpp"

namespace ampsim {

const char* to_string(ScoreKind kind) {
    return kind == ScoreKind::Rsi ? "rsi" : "congestion";
}

const char* to_string(TreatedSide side) { return side == TreatedSide::Leq ? "leq" : "geq"; }

double rsi(double market_supply, double firm_supply, double load_forecast, double reserves) {
    if (market_supply < 0.0 || firm_supply < 0.0) {
        fail(Errc::NegativeInput, "supply quantities must be >= 0");
    }
    if (load_forecast < 0.0 || reserves < 0.0) {
        fail(Errc::NegativeInput, "load forecast and reserves must be >= 0");
    }
    if (firm_supply > market_supply) {
        fail(Errc::NegativeInput, "firm supply exceeds market supply");
    }
    const double denom = load_forecast + reserves;
    if (denom <= 0.0) fail(Errc::ZeroDenominator, "load forecast + reserves is zero");
    return (market_supply - firm_supply) / denom;
}

HourSupply hour_supply(std::span<const IncrementalOffer> offers_at_hour, MustTakeRule rule) {
    HourSupply out;
    // One contribution per unit; offers are segment rows, so walk unit groups.
    std::size_t i = 0;
    while (i < offers_at_hour.size()) {
        std::size_t j = i;
        double segment_sum = 0.0;
        while (j < offers_at_hour.size() &&
               offers_at_hour[j].unit_id == offers_at_hour[i].unit_id &&
               offers_at_hour[j].hour == offers_at_hour[i].hour) {
            segment_sum += offers_at_hour[j].quantity;
            ++j;
        }
        const auto& unit = offers_at_hour[i];
        double contribution = 0.0;
        switch (unit.status) {
            case OfferStatus::Unavailable:
                contribution = 0.0;
                break;
            case OfferStatus::MustRun: {
                // Must-take energy is netted out; only capability above it is
                // supply that could be withheld.
                const double must_take =
                    rule == MustTakeRule::MaxOutput ? unit.max_output : segment_sum;
                contribution = std::max(0.0, unit.max_output - must_take);
                break;
            }
            case OfferStatus::Economic:
                contribution = unit.max_output;
                break;
        }
        out.market_supply += contribution;
        out.firm_supply_by_bidder[unit.bidder_id] += contribution;
        i = j;
    }
    return out;
}

ScoreSeries market_rsi_series(const Dataset& data, MustTakeRule rule) {
    ScoreSeries series;
    series.kind = ScoreKind::Rsi;
    for (const auto& m : data.market) {
        const auto offers = data.offers_at(m.hour);
        if (offers.empty()) continue;
        const HourSupply supply = hour_supply(offers, rule);
        for (const auto& [bidder, firm] : supply.firm_supply_by_bidder) {
            series.entries.push_back(
                {m.hour, bidder, rsi(supply.market_supply, firm, m.load_forecast, m.reserves)});
        }
    }
    return series;
}

double congestion_index(std::span<const AreaRecord> areas) {
    double total_load = 0.0;
    for (const auto& a : areas) {
        if (!a.is_excluded) total_load += a.load;
    }
    if (total_load <= 0.0) {
        fail(Errc::ZeroTotalLoad, "no non-excluded load to weight the congestion index");
    }
    double index = 0.0;
    for (const auto& a : areas) {
        if (a.is_excluded) continue;
        index += (a.load / total_load) * a.shadow_price;
    }
    return index;
}

double congestion_at(const Dataset& data, HourId t) {
    const MarketHourRecord* prev = data.market_at(t - 1);
    if (!prev) {
        fail(Errc::NoLaggedData, "no record one hour before " + format_hour(t) +
                                     " to lag the congestion index from");
    }
    return congestion_index(prev->areas);
}

ScoreSeries congestion_series(const Dataset& data) {
    ScoreSeries series;
    series.kind = ScoreKind::Congestion;
    for (const auto& m : data.market) {
        const MarketHourRecord* prev = data.market_at(m.hour - 1);
        if (!prev) continue;  // first hour / gap: no lagged value, omit
        series.entries.push_back({m.hour, "", congestion_index(prev->areas)});
    }
    return series;
}

}  // namespace ampsim
