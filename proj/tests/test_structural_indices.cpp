// Structural-score tests: RSI arithmetic and aggregation, must-take
// handling, and the lagged load-weighted congestion index.

#include <string>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/structural_indices.hpp"
#include "doctest.h"

using namespace ampsim;

namespace {

IncrementalOffer unit_offer(HourId h, std::string unit, std::string bidder, double price,
                            double qty, double max_out,
                            OfferStatus st = OfferStatus::Economic) {
    IncrementalOffer o;
    o.hour = h;
    o.unit_id = std::move(unit);
    o.bidder_id = std::move(bidder);
    o.segment = 1;
    o.price = price;
    o.quantity = qty;
    o.status = st;
    o.max_output = max_out;
    return o;
}

MarketHourRecord hour_record(HourId h, double load, double reserves,
                             std::vector<AreaRecord> areas = {}) {
    MarketHourRecord m;
    m.hour = h;
    m.load_forecast = load;
    m.reserves = reserves;
    m.gas_price = 3.0;
    m.areas = std::move(areas);
    return m;
}

}  // namespace

// ===== rsi =====

TEST_CASE("rsi evaluates the residual-supply ratio") {
    CHECK(rsi(1200, 300, 1000, 100) == doctest::Approx(900.0 / 1100.0));
    CHECK(rsi(1100, 0, 1000, 100) == doctest::Approx(1.0));   // zero firm supply at the cutoff
    CHECK(rsi(1000, 1000, 900, 100) == doctest::Approx(0.0)); // sole supplier
}

TEST_CASE("rsi rejects degenerate inputs") {
    CHECK_THROWS_AS(rsi(1000, 100, 0, 0), AmpError);     // zero denominator
    CHECK_THROWS_AS(rsi(1000, -1, 1000, 0), AmpError);   // negative firm supply
    CHECK_THROWS_AS(rsi(-5, 0, 1000, 0), AmpError);      // negative market supply
    CHECK_THROWS_AS(rsi(100, 200, 1000, 0), AmpError);   // firm above market
}

TEST_CASE("rsi is monotone in its supply arguments") {
    const double base = rsi(1200, 300, 1000, 100);
    CHECK(rsi(1200, 400, 1000, 100) < base);  // more firm supply -> lower RSI
    CHECK(rsi(1300, 300, 1000, 100) > base);  // more market supply -> higher RSI
}

// ===== hour_supply =====

TEST_CASE("hour_supply nets must-take energy and drops unavailable units") {
    std::vector<IncrementalOffer> offers = {
        unit_offer(100, "U1", "B1", 20, 50, 100),
        unit_offer(100, "U2", "B1", 25, 60, 80, OfferStatus::MustRun),
        unit_offer(100, "U3", "B2", 30, 70, 150),
        unit_offer(100, "U4", "B2", 35, 10, 90, OfferStatus::Unavailable),
    };

    SUBCASE("max_output rule: MUST_RUN contributes max_output - max_output = 0") {
        HourSupply s = hour_supply(offers, MustTakeRule::MaxOutput);
        // U1: 100, U2: 80 - 80 = 0, U3: 150, U4: dropped.
        CHECK(s.market_supply == doctest::Approx(250.0));
        CHECK(s.firm_supply_by_bidder.at("B1") == doctest::Approx(100.0));
        CHECK(s.firm_supply_by_bidder.at("B2") == doctest::Approx(150.0));
    }
    SUBCASE("segment-sum rule nets only the offered quantity") {
        HourSupply s = hour_supply(offers, MustTakeRule::SegmentSum);
        // U2 contributes 80 - 60 = 20 of flexible supply.
        CHECK(s.market_supply == doctest::Approx(270.0));
        CHECK(s.firm_supply_by_bidder.at("B1") == doctest::Approx(120.0));
    }
    SUBCASE("must-take never drives a unit's contribution negative") {
        std::vector<IncrementalOffer> over = {
            unit_offer(100, "U1", "B1", 20, 120, 100, OfferStatus::MustRun)};  // offers > cap
        HourSupply s = hour_supply(over, MustTakeRule::SegmentSum);
        CHECK(s.market_supply == doctest::Approx(0.0));
        CHECK(s.firm_supply_by_bidder.at("B1") == doctest::Approx(0.0));
    }
    SUBCASE("multi-segment units count max_output once") {
        std::vector<IncrementalOffer> multi = {
            unit_offer(100, "U1", "B1", 20, 30, 100),
            unit_offer(100, "U1", "B1", 25, 30, 100),
        };
        multi[1].segment = 2;
        HourSupply s = hour_supply(multi);
        CHECK(s.market_supply == doctest::Approx(100.0));
    }
}

// ===== market_rsi_series =====

TEST_CASE("market_rsi_series computes one RSI per bidder-hour") {
    // Two bidders with equal capacity C and load + reserves = C: each firm's
    // residual supply is exactly the demand, so RSI = 1 for both.
    const double C = 400.0;
    std::vector<IncrementalOffer> offers = {
        unit_offer(100, "U1", "B1", 20, C, C),
        unit_offer(100, "U2", "B2", 25, C, C),
        unit_offer(101, "U1", "B1", 20, C, C),
        unit_offer(101, "U2", "B2", 25, C, C),
    };
    std::vector<MarketHourRecord> market = {hour_record(100, 360, 40), hour_record(101, 300, 20)};
    Dataset data = assemble_dataset(offers, market, 12);

    ScoreSeries s = market_rsi_series(data);
    CHECK(s.kind == ScoreKind::Rsi);
    REQUIRE(s.entries.size() == 4);
    CHECK(s.entries[0].hour == 100);
    CHECK(s.entries[0].bidder_id == "B1");
    CHECK(s.entries[0].value == doctest::Approx(1.0));
    CHECK(s.entries[1].bidder_id == "B2");
    CHECK(s.entries[1].value == doctest::Approx(1.0));
    // Lighter load at hour 101 pushes both above 1.
    CHECK(s.entries[2].value == doctest::Approx(400.0 / 320.0));

    SUBCASE("marking a unit UNAVAILABLE lowers other firms' RSI") {
        Dataset d = data;
        for (auto& o : d.offers) {
            if (o.hour == 100 && o.unit_id == "U2") o.status = OfferStatus::Unavailable;
        }
        ScoreSeries t = market_rsi_series(d);
        // B1's RSI at hour 100 drops: market supply lost U2's capacity.
        CHECK(t.entries[0].bidder_id == "B1");
        CHECK(t.entries[0].value < s.entries[0].value);
        CHECK(t.entries[0].value == doctest::Approx(0.0));  // only B1's own unit remains
    }
    SUBCASE("all-MUST_RUN fleet has zero flexible supply and zero RSI") {
        Dataset d = data;
        for (auto& o : d.offers) o.status = OfferStatus::MustRun;
        ScoreSeries t = market_rsi_series(d);
        for (const auto& e : t.entries) CHECK(e.value == doctest::Approx(0.0));
    }
    SUBCASE("zero-supply bidder holds the maximal RSI in its hour") {
        Dataset d = data;
        for (auto& o : d.offers) {
            if (o.hour == 100 && o.unit_id == "U1") o.status = OfferStatus::Unavailable;
        }
        ScoreSeries t = market_rsi_series(d);
        // B1 has nothing available at hour 100 -> its RSI is the full market
        // ratio, strictly above B2's.
        REQUIRE(t.entries.size() == 4);
        CHECK(t.entries[0].bidder_id == "B1");
        CHECK(t.entries[0].value >= t.entries[1].value);
    }
}

// ===== congestion =====

TEST_CASE("congestion_index is the load-weighted mean shadow price") {
    SUBCASE("equal loads reduce to the arithmetic mean") {
        std::vector<AreaRecord> areas = {{"A", 100, 2.0, false}, {"B", 100, 4.0, false}};
        CHECK(congestion_index(areas) == doctest::Approx(3.0));
    }
    SUBCASE("weights follow loads") {
        std::vector<AreaRecord> areas = {{"A", 100, 0.0, false}, {"B", 300, 4.0, false}};
        CHECK(congestion_index(areas) == doctest::Approx(3.0));  // 0.25*0 + 0.75*4
    }
    SUBCASE("single non-excluded area returns its shadow price") {
        std::vector<AreaRecord> areas = {{"A", 250, 7.5, false}};
        CHECK(congestion_index(areas) == doctest::Approx(7.5));
    }
    SUBCASE("excluded areas contribute neither load nor price") {
        std::vector<AreaRecord> areas = {
            {"A", 100, 2.0, false}, {"B", 100, 4.0, false}, {"CITY", 1000, 50.0, true}};
        CHECK(congestion_index(areas) == doctest::Approx(3.0));
        // Index stays inside the non-excluded price range.
        CHECK(congestion_index(areas) >= 2.0);
        CHECK(congestion_index(areas) <= 4.0);
    }
    SUBCASE("no non-excluded load -> ZeroTotalLoad") {
        std::vector<AreaRecord> only_excluded = {{"CITY", 1000, 50.0, true}};
        CHECK_THROWS_AS(congestion_index(only_excluded), AmpError);
        std::vector<AreaRecord> zero_load = {{"A", 0, 2.0, false}};
        CHECK_THROWS_AS(congestion_index(zero_load), AmpError);
    }
}

TEST_CASE("congestion_at uses the t-1 record; series skips gap hours") {
    auto areas_at = [](double p1, double p2) {
        return std::vector<AreaRecord>{{"A", 100, p1, false}, {"B", 100, p2, false}};
    };
    std::vector<IncrementalOffer> offers = {
        unit_offer(100, "U1", "B1", 20, 50, 100), unit_offer(101, "U1", "B1", 20, 50, 100),
        unit_offer(102, "U1", "B1", 20, 50, 100),
        // Gap at 103; series resumes at 104.
        unit_offer(104, "U1", "B1", 20, 50, 100), unit_offer(105, "U1", "B1", 20, 50, 100)};
    std::vector<MarketHourRecord> market = {
        hour_record(100, 40, 0, areas_at(2, 4)), hour_record(101, 40, 0, areas_at(1, 1)),
        hour_record(102, 40, 0, areas_at(0, 8)), hour_record(104, 40, 0, areas_at(5, 5)),
        hour_record(105, 40, 0, areas_at(6, 6))};
    Dataset data = assemble_dataset(offers, market, 12);

    CHECK(congestion_at(data, 101) == doctest::Approx(3.0));  // from hour 100
    CHECK(congestion_at(data, 102) == doctest::Approx(1.0));  // from hour 101
    CHECK_THROWS_AS(congestion_at(data, 100), AmpError);      // first hour: no lag
    CHECK_THROWS_AS(congestion_at(data, 104), AmpError);      // hour 103 missing

    ScoreSeries s = congestion_series(data);
    CHECK(s.kind == ScoreKind::Congestion);
    // Hours 100 and 104 are omitted (no usable lag), leaving 101, 102, 105.
    REQUIRE(s.entries.size() == 3);
    CHECK(s.entries[0].hour == 101);
    CHECK(s.entries[0].bidder_id.empty());
    CHECK(s.entries[0].value == doctest::Approx(3.0));
    CHECK(s.entries[1].hour == 102);
    CHECK(s.entries[2].hour == 105);
    CHECK(s.entries[2].value == doctest::Approx(5.0));
}
