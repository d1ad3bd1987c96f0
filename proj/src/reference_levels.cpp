#include "ampsim/reference_levels.hpp"

#include <algorithm>

#include "ampsim/errors.hpp"
#include "ampsim/parallel.hpp"

namespace ampsim {
namespace {

void check_window(int window_days, const EconomicBand& band) {
    if (window_days <= 0) fail(Errc::InvalidHours, "reference window must be >= 1 day");
    if (!(band.low <= band.high)) fail(Errc::InvalidSpec, "economic band low > high");
}

bool qualifies(const IncrementalOffer& o, const EconomicBand& band) {
    return o.status == OfferStatus::Economic && o.quantity > 0.0 && o.price >= band.low &&
           o.price <= band.high;
}

}  // namespace

std::optional<double> reference_level_at(std::span<const IncrementalOffer> unit_offers, HourId t,
                                         int window_days, EconomicBand band) {
    check_window(window_days, band);
    const HourId window_start = t - static_cast<HourId>(window_days) * kHoursPerDay;
    // Accumulate in extended precision so the rolling implementation (prefix
    // sums) and this direct one agree to well under 1e-9.
    long double sum_pq = 0.0L;
    long double sum_q = 0.0L;
    for (const auto& o : unit_offers) {
        if (o.hour >= t) break;  // sorted by hour; t itself is excluded
        if (o.hour < window_start || !qualifies(o, band)) continue;
        sum_pq += static_cast<long double>(o.price) * static_cast<long double>(o.quantity);
        sum_q += static_cast<long double>(o.quantity);
    }
    if (sum_q <= 0.0L) return std::nullopt;
    return static_cast<double>(sum_pq / sum_q);
}

ReferenceLevels::ReferenceLevels(std::vector<HourId> hours, std::vector<std::string> units,
                                 std::vector<std::optional<double>> values)
    : hours_(std::move(hours)), units_(std::move(units)), values_(std::move(values)) {}

std::optional<double> ReferenceLevels::at(const std::string& unit_id, HourId hour) const {
    auto u = std::lower_bound(units_.begin(), units_.end(), unit_id);
    if (u == units_.end() || *u != unit_id) return std::nullopt;
    auto h = std::lower_bound(hours_.begin(), hours_.end(), hour);
    if (h == hours_.end() || *h != hour) return std::nullopt;
    const std::size_t ui = static_cast<std::size_t>(u - units_.begin());
    const std::size_t hi = static_cast<std::size_t>(h - hours_.begin());
    return values_[ui * hours_.size() + hi];
}

std::map<std::string, std::optional<double>> ReferenceLevels::row_at(HourId hour) const {
    std::map<std::string, std::optional<double>> out;
    auto h = std::lower_bound(hours_.begin(), hours_.end(), hour);
    if (h == hours_.end() || *h != hour) return out;
    const std::size_t hi = static_cast<std::size_t>(h - hours_.begin());
    for (std::size_t ui = 0; ui < units_.size(); ++ui) {
        out.emplace(units_[ui], values_[ui * hours_.size() + hi]);
    }
    return out;
}

ReferenceLevels compute_reference_levels(const Dataset& data, int window_days, EconomicBand band,
                                         int threads) {
    check_window(window_days, band);
    std::vector<HourId> hours = data.hours();

    // Qualifying history per unit, hour-ascending (dataset offers are sorted
    // by hour, so per-unit appends preserve hour order).
    struct UnitHistory {
        std::vector<HourId> hour;
        std::vector<long double> prefix_pq;  // prefix_pq[i] = sum of first i rows
        std::vector<long double> prefix_q;
    };
    std::map<std::string, std::size_t> unit_index;
    for (const auto& o : data.offers) unit_index.emplace(o.unit_id, 0);
    std::vector<std::string> units;
    units.reserve(unit_index.size());
    for (auto& [unit, idx] : unit_index) {
        idx = units.size();
        units.push_back(unit);
    }
    std::vector<UnitHistory> history(units.size());
    for (const auto& o : data.offers) {
        if (!qualifies(o, band)) continue;
        auto& h = history[unit_index[o.unit_id]];
        h.hour.push_back(o.hour);
        h.prefix_pq.push_back(static_cast<long double>(o.price) *
                              static_cast<long double>(o.quantity));
        h.prefix_q.push_back(static_cast<long double>(o.quantity));
    }
    for (auto& h : history) {
        long double pq = 0.0L, q = 0.0L;
        for (std::size_t i = 0; i < h.hour.size(); ++i) {
            pq += h.prefix_pq[i];
            q += h.prefix_q[i];
            h.prefix_pq[i] = pq;
            h.prefix_q[i] = q;
        }
    }

    std::vector<std::optional<double>> values(units.size() * hours.size());
    const HourId window_hours = static_cast<HourId>(window_days) * kHoursPerDay;
    detail::parallel_chunks(units.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ui = begin; ui < end; ++ui) {
            const auto& h = history[ui];
            for (std::size_t hi = 0; hi < hours.size(); ++hi) {
                const HourId t = hours[hi];
                const auto lo =
                    std::lower_bound(h.hour.begin(), h.hour.end(), t - window_hours) -
                    h.hour.begin();
                const auto up = std::lower_bound(h.hour.begin(), h.hour.end(), t) - h.hour.begin();
                if (up <= lo) continue;
                const long double pq =
                    h.prefix_pq[static_cast<std::size_t>(up) - 1] -
                    (lo > 0 ? h.prefix_pq[static_cast<std::size_t>(lo) - 1] : 0.0L);
                const long double q =
                    h.prefix_q[static_cast<std::size_t>(up) - 1] -
                    (lo > 0 ? h.prefix_q[static_cast<std::size_t>(lo) - 1] : 0.0L);
                if (q <= 0.0L) continue;
                values[ui * hours.size() + hi] = static_cast<double>(pq / q);
            }
        }
    });
    return ReferenceLevels(std::move(hours), std::move(units), std::move(values));
}

}  // namespace ampsim
