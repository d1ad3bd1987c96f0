#include "ampsim/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"

namespace ampsim {
namespace {

const std::vector<std::string> kOffersHeader = {
    "hour", "unit_id", "bidder_id", "segment", "price_usd_per_mwh",
    "quantity_mw", "status", "max_output_mw"};
const std::vector<std::string> kMarketHeader = {
    "hour", "load_forecast_mwh", "reserves_mwh", "gas_price_usd_per_mmbtu"};
const std::vector<std::string> kAreasHeader = {
    "hour", "area_id", "load_mwh", "shadow_price_usd_per_mwh", "is_excluded"};

bool offer_order(const IncrementalOffer& a, const IncrementalOffer& b) {
    return std::tie(a.hour, a.unit_id, a.segment) < std::tie(b.hour, b.unit_id, b.segment);
}

std::string offer_loc(const IncrementalOffer& o) {
    return "unit " + o.unit_id + " @ " + format_hour(o.hour);
}

// Per-(hour,unit) curve checks on the sorted offer list.
void check_offer_curves(const std::vector<IncrementalOffer>& offers, int segment_cap,
                        std::string_view file) {
    std::size_t i = 0;
    while (i < offers.size()) {
        std::size_t j = i;
        while (j < offers.size() && offers[j].hour == offers[i].hour &&
               offers[j].unit_id == offers[i].unit_id) {
            ++j;
        }
        const auto group = std::span(offers).subspan(i, j - i);
        if (group.size() > static_cast<std::size_t>(segment_cap)) {
            fail(Errc::SegmentCapExceeded, std::string(file) + ": " + offer_loc(group[0]) +
                                               " has " + std::to_string(group.size()) +
                                               " segments, cap is " + std::to_string(segment_cap));
        }
        for (std::size_t k = 0; k < group.size(); ++k) {
            const auto& o = group[k];
            if (o.segment < 1 || o.segment > segment_cap) {
                fail(Errc::SegmentCapExceeded,
                     std::string(file) + ": " + offer_loc(o) + " segment index " +
                         std::to_string(o.segment) + " outside 1.." + std::to_string(segment_cap));
            }
            if (k > 0) {
                if (group[k].segment == group[k - 1].segment) {
                    fail(Errc::DuplicateSegment, std::string(file) + ": " + offer_loc(o) +
                                                     " duplicate segment " +
                                                     std::to_string(o.segment));
                }
                if (group[k].price < group[k - 1].price) {
                    fail(Errc::NonMonotoneSteps,
                         std::string(file) + ": " + offer_loc(o) + " price " +
                             csv::format_double(group[k].price) + " on segment " +
                             std::to_string(group[k].segment) + " below previous step");
                }
            }
        }
        i = j;
    }
}

}  // namespace

const char* to_string(OfferStatus status) {
    switch (status) {
        case OfferStatus::Economic: return "ECONOMIC";
        case OfferStatus::MustRun: return "MUST_RUN";
        case OfferStatus::Unavailable: return "UNAVAILABLE";
    }
    return "?";
}

std::optional<OfferStatus> parse_status(std::string_view text) {
    if (text == "ECONOMIC") return OfferStatus::Economic;
    if (text == "MUST_RUN") return OfferStatus::MustRun;
    if (text == "UNAVAILABLE") return OfferStatus::Unavailable;
    return std::nullopt;
}

const MarketHourRecord* Dataset::market_at(HourId hour) const {
    auto it = std::lower_bound(market.begin(), market.end(), hour,
                               [](const MarketHourRecord& r, HourId h) { return r.hour < h; });
    if (it == market.end() || it->hour != hour) return nullptr;
    return &*it;
}

std::vector<HourId> Dataset::hours() const {
    std::vector<HourId> out;
    out.reserve(market.size());
    for (const auto& m : market) out.push_back(m.hour);
    return out;
}

std::span<const IncrementalOffer> Dataset::offers_at(HourId hour) const {
    auto lo = std::lower_bound(offers.begin(), offers.end(), hour,
                               [](const IncrementalOffer& o, HourId h) { return o.hour < h; });
    auto hi = std::upper_bound(lo, offers.end(), hour,
                               [](HourId h, const IncrementalOffer& o) { return h < o.hour; });
    return std::span<const IncrementalOffer>(offers.data() + (lo - offers.begin()),
                                             static_cast<std::size_t>(hi - lo));
}

std::vector<IncrementalOffer> load_offers_csv(const std::filesystem::path& path, int segment_cap) {
    if (segment_cap < 1) fail(Errc::InvalidSpec, "segment cap must be >= 1");
    const std::string file = path.string();
    std::vector<IncrementalOffer> out;
    for (const auto& row : csv::read_rows(path, kOffersHeader)) {
        IncrementalOffer o;
        auto hour = try_parse_hour(row.fields[0]);
        if (!hour) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " bad hour '" + row.fields[0] + "'");
        }
        o.hour = *hour;
        o.unit_id = row.fields[1];
        o.bidder_id = row.fields[2];
        if (o.unit_id.empty() || o.bidder_id.empty()) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " empty unit_id/bidder_id");
        }
        o.segment = static_cast<int>(csv::parse_long(row, 3, "segment", file));
        o.price = csv::parse_double(row, 4, "price_usd_per_mwh", file);
        o.quantity = csv::parse_double(row, 5, "quantity_mw", file);
        auto status = parse_status(row.fields[6]);
        if (!status) {
            fail(Errc::MalformedRow, file + ":" + std::to_string(row.line_no) + " bad status '" +
                                         row.fields[6] + "'");
        }
        o.status = *status;
        o.max_output = csv::parse_double(row, 7, "max_output_mw", file);
        if (!std::isfinite(o.price) || !std::isfinite(o.quantity) || !std::isfinite(o.max_output)) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " non-finite numeric field");
        }
        if (o.quantity < 0.0) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " negative quantity_mw");
        }
        if (o.max_output <= 0.0) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " max_output_mw must be > 0");
        }
        out.push_back(std::move(o));
    }
    std::sort(out.begin(), out.end(), offer_order);
    check_offer_curves(out, segment_cap, file);
    return out;
}

std::vector<MarketHourRecord> load_market_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::vector<MarketHourRecord> out;
    for (const auto& row : csv::read_rows(path, kMarketHeader)) {
        MarketHourRecord m;
        auto hour = try_parse_hour(row.fields[0]);
        if (!hour) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " bad hour '" + row.fields[0] + "'");
        }
        m.hour = *hour;
        m.load_forecast = csv::parse_double(row, 1, "load_forecast_mwh", file);
        m.reserves = csv::parse_double(row, 2, "reserves_mwh", file);
        m.gas_price = csv::parse_double(row, 3, "gas_price_usd_per_mmbtu", file);
        if (m.load_forecast < 0.0 || m.reserves < 0.0) {
            fail(Errc::NegativeInput,
                 file + ":" + std::to_string(row.line_no) + " negative load/reserves");
        }
        out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(),
              [](const MarketHourRecord& a, const MarketHourRecord& b) { return a.hour < b.hour; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].hour == out[i - 1].hour) {
            fail(Errc::MalformedRow, file + ": duplicate market hour " + format_hour(out[i].hour));
        }
    }
    return out;
}

std::map<HourId, std::vector<AreaRecord>> load_areas_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::map<HourId, std::vector<AreaRecord>> out;
    std::set<std::pair<HourId, std::string>> seen;
    for (const auto& row : csv::read_rows(path, kAreasHeader)) {
        auto hour = try_parse_hour(row.fields[0]);
        if (!hour) {
            fail(Errc::MalformedRow,
                 file + ":" + std::to_string(row.line_no) + " bad hour '" + row.fields[0] + "'");
        }
        AreaRecord a;
        a.area_id = row.fields[1];
        if (a.area_id.empty()) {
            fail(Errc::MalformedRow, file + ":" + std::to_string(row.line_no) + " empty area_id");
        }
        a.load = csv::parse_double(row, 2, "load_mwh", file);
        a.shadow_price = csv::parse_double(row, 3, "shadow_price_usd_per_mwh", file);
        a.is_excluded = csv::parse_bool(row, 4, "is_excluded", file);
        if (a.load < 0.0) {
            fail(Errc::NegativeInput, file + ":" + std::to_string(row.line_no) + " negative load_mwh");
        }
        if (!seen.insert({*hour, a.area_id}).second) {
            fail(Errc::MalformedRow, file + ":" + std::to_string(row.line_no) + " duplicate area '" +
                                         a.area_id + "' at " + format_hour(*hour));
        }
        out[*hour].push_back(std::move(a));
    }
    return out;
}

void write_offers_csv(const std::filesystem::path& path,
                      std::span<const IncrementalOffer> offers) {
    csv::Writer w(kOffersHeader);
    for (const auto& o : offers) {
        w.add_row({format_hour(o.hour), o.unit_id, o.bidder_id, std::to_string(o.segment),
                   csv::format_double(o.price), csv::format_double(o.quantity),
                   to_string(o.status), csv::format_double(o.max_output)});
    }
    w.save(path);
}

void write_market_csv(const std::filesystem::path& path,
                      std::span<const MarketHourRecord> market) {
    csv::Writer w(kMarketHeader);
    for (const auto& m : market) {
        w.add_row({format_hour(m.hour), csv::format_double(m.load_forecast),
                   csv::format_double(m.reserves), csv::format_double(m.gas_price)});
    }
    w.save(path);
}

void write_areas_csv(const std::filesystem::path& path,
                     std::span<const MarketHourRecord> market) {
    csv::Writer w(kAreasHeader);
    for (const auto& m : market) {
        for (const auto& a : m.areas) {
            w.add_row({format_hour(m.hour), a.area_id, csv::format_double(a.load),
                       csv::format_double(a.shadow_price), a.is_excluded ? "true" : "false"});
        }
    }
    w.save(path);
}

Dataset assemble_dataset(std::vector<IncrementalOffer> offers,
                         std::vector<MarketHourRecord> market, int segment_cap,
                         const std::map<HourId, std::vector<AreaRecord>>* areas) {
    Dataset d;
    d.segment_cap = segment_cap;
    d.offers = std::move(offers);
    d.market = std::move(market);
    std::sort(d.offers.begin(), d.offers.end(), offer_order);
    std::sort(d.market.begin(), d.market.end(),
              [](const MarketHourRecord& a, const MarketHourRecord& b) { return a.hour < b.hour; });
    check_offer_curves(d.offers, segment_cap, "offers");
    for (std::size_t i = 1; i < d.market.size(); ++i) {
        if (d.market[i].hour == d.market[i - 1].hour) {
            fail(Errc::MalformedRow, "duplicate market hour " + format_hour(d.market[i].hour));
        }
    }
    if (areas) {
        for (auto& m : d.market) {
            auto it = areas->find(m.hour);
            if (it != areas->end()) m.areas = it->second;
        }
    }
    for (const auto& o : d.offers) d.unit_to_bidder.emplace(o.unit_id, o.bidder_id);
    return d;
}

std::optional<double> max_economic_bid(std::span<const IncrementalOffer> unit_offers_at_hour) {
    std::optional<double> best;
    for (const auto& o : unit_offers_at_hour) {
        if (o.status != OfferStatus::Economic || o.quantity <= 0.0) continue;
        if (!best || o.price > *best) best = o.price;
    }
    return best;
}

std::vector<Finding> validate_dataset(const Dataset& data) {
    std::vector<Finding> findings;
    auto report = [&](std::string loc, std::string msg) {
        findings.push_back(Finding{std::move(loc), std::move(msg)});
    };

    std::set<HourId> market_hours;
    for (const auto& m : data.market) market_hours.insert(m.hour);

    std::size_t i = 0;
    while (i < data.offers.size()) {
        std::size_t j = i;
        double offered = 0.0;
        while (j < data.offers.size() && data.offers[j].hour == data.offers[i].hour &&
               data.offers[j].unit_id == data.offers[i].unit_id) {
            offered += data.offers[j].quantity;
            ++j;
        }
        const auto& head = data.offers[i];
        if (offered > head.max_output * (1.0 + 1e-9)) {
            report(offer_loc(head), "offered quantity " + csv::format_double(offered) +
                                        " MW exceeds max_output " +
                                        csv::format_double(head.max_output) + " MW");
        }
        for (std::size_t k = i; k < j; ++k) {
            if (data.offers[k].bidder_id != head.bidder_id) {
                report(offer_loc(head), "unit mapped to multiple bidders within one hour");
                break;
            }
        }
        if (!market_hours.count(head.hour)) {
            report(offer_loc(head), "offer hour has no market record");
        }
        i = j;
    }

    std::map<std::string, std::string> first_bidder;
    for (const auto& o : data.offers) {
        auto [it, inserted] = first_bidder.emplace(o.unit_id, o.bidder_id);
        if (!inserted && it->second != o.bidder_id) {
            report("unit " + o.unit_id, "bidder changes across hours (" + it->second + " -> " +
                                            o.bidder_id + "); grouping uses per-hour bidder_id");
            it->second = o.bidder_id;  // report each transition once
        }
    }

    std::set<HourId> offer_hours;
    for (const auto& o : data.offers) offer_hours.insert(o.hour);
    for (const auto& m : data.market) {
        if (!offer_hours.count(m.hour)) {
            report("market @ " + format_hour(m.hour), "market hour has no offers");
        }
    }
    for (const auto& m : data.market) {
        for (const auto& a : m.areas) {
            if (!a.is_excluded && a.load == 0.0 && a.shadow_price != 0.0) {
                report("area " + a.area_id + " @ " + format_hour(m.hour),
                       "zero load but nonzero shadow price");
            }
        }
    }
    return findings;
}

}  // namespace ampsim
