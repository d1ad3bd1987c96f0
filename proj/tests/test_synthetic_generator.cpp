// Generator tests: determinism, the noiseless DGP identity, dataset
// well-formedness, treated-share calibration, and the perturbation scenarios.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ampsim/amp_screening.hpp"
#include "ampsim/core_data.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/reference_levels.hpp"
#include "ampsim/structural_indices.hpp"
#include "ampsim/synthetic_generator.hpp"
#include "doctest.h"

using namespace ampsim;

namespace {

SynthSpec small_spec(std::uint64_t seed = 7) {
    SynthSpec spec;
    spec.n_bidders = 8;
    spec.units_per_bidder = 1;
    spec.n_hours = 200;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("generate is deterministic in the seed") {
    const SynthSpec spec = small_spec(11);
    auto [d1, t1] = generate(spec);
    auto [d2, t2] = generate(spec);
    REQUIRE(d1.offers.size() == d2.offers.size());
    for (std::size_t i = 0; i < d1.offers.size(); ++i) {
        CHECK(d1.offers[i].unit_id == d2.offers[i].unit_id);
        CHECK(d1.offers[i].price == d2.offers[i].price);       // bitwise
        CHECK(d1.offers[i].quantity == d2.offers[i].quantity);
    }
    REQUIRE(d1.market.size() == d2.market.size());
    for (std::size_t i = 0; i < d1.market.size(); ++i) {
        CHECK(d1.market[i].load_forecast == d2.market[i].load_forecast);
        CHECK(d1.market[i].gas_price == d2.market[i].gas_price);
    }
    REQUIRE(t1.panel.size() == t2.panel.size());
    for (std::size_t i = 0; i < t1.panel.size(); ++i) {
        CHECK(t1.panel[i].p_max == t2.panel[i].p_max);
    }

    // A different seed moves the draws.
    SynthSpec other = spec;
    other.seed = 12;
    auto [d3, t3] = generate(other);
    bool any_differs = false;
    for (std::size_t i = 0; i < std::min(d1.offers.size(), d3.offers.size()); ++i) {
        if (d1.offers[i].price != d3.offers[i].price) any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("generate_panel matches the panel embedded in generate") {
    const SynthSpec spec = small_spec(3);
    auto [rows, truth_a] = generate_panel(spec);
    auto [data, truth_b] = generate(spec);
    REQUIRE(rows.size() == truth_b.panel.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].hour == truth_b.panel[i].hour);
        CHECK(rows[i].bidder_id == truth_b.panel[i].bidder_id);
        CHECK(rows[i].p_max == truth_b.panel[i].p_max);  // bitwise
        CHECK(rows[i].score == truth_b.panel[i].score);
        CHECK(rows[i].ref == truth_b.panel[i].ref);
        CHECK(rows[i].gas == truth_b.panel[i].gas);
    }
    CHECK(truth_a.tau_by_bidder == truth_b.tau_by_bidder);
    CHECK(truth_a.beta0_by_bidder == truth_b.beta0_by_bidder);
}

TEST_CASE("noiseless output reproduces the DGP formula exactly") {
    SynthSpec spec = small_spec(5);
    spec.sigma_eps = 0.0;
    spec.sigma_bidder = 0.0;
    auto [rows, truth] = generate_panel(spec);
    std::map<std::string, std::size_t> bidder_index;
    for (std::size_t j = 0; j < truth.bidder_ids.size(); ++j) {
        bidder_index[truth.bidder_ids[j]] = j;
    }
    for (const auto& r : rows) {
        const std::size_t j = bidder_index.at(r.bidder_id);
        const double expected = truth.beta0_by_bidder[j] + truth.tau_by_bidder[j] * r.treatment +
                                truth.beta2 * r.centered_score +
                                truth.beta3 * r.centered_score * r.treatment +
                                truth.beta4 * r.ref + truth.beta5 * r.gas +
                                truth.bidder_effect[j];
        CHECK(r.p_max == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("the maximum economic bid of each unit-hour equals the panel p_max") {
    const SynthSpec spec = small_spec(9);
    auto [data, truth] = generate(spec);
    std::map<std::pair<HourId, std::string>, double> top;
    for (const auto& r : truth.panel) {
        top[{r.hour, r.unit_id}] = r.p_max;
    }
    std::size_t i = 0;
    std::size_t checked = 0;
    while (i < data.offers.size()) {
        std::size_t j = i;
        while (j < data.offers.size() && data.offers[j].hour == data.offers[i].hour &&
               data.offers[j].unit_id == data.offers[i].unit_id) {
            ++j;
        }
        const auto span = std::span<const IncrementalOffer>(data.offers.data() + i, j - i);
        const auto bid = max_economic_bid(span);
        REQUIRE(bid.has_value());
        CHECK(*bid == top.at({span.front().hour, span.front().unit_id}));  // bitwise
        ++checked;
        i = j;
    }
    CHECK(checked == truth.panel.size());
}

TEST_CASE("generated datasets are internally consistent") {
    auto [data, truth] = generate(small_spec(13));
    CHECK(validate_dataset(data).empty());
    // Offer curves are monotone with capped segment counts by construction;
    // assembly already threw if not. Market rows cover every offer hour.
    CHECK(data.market.size() == 200);
    CHECK(data.hours().front() == kDefaultStartHour);
    // Areas exist with at least one excluded metro area.
    REQUIRE_FALSE(data.market.front().areas.empty());
    bool any_excluded = false;
    for (const auto& a : data.market.front().areas) any_excluded |= a.is_excluded;
    CHECK(any_excluded);
    // Ground truth covers every bidder-hour.
    CHECK(truth.treatment.size() == 200 * 8);
    CHECK(truth.panel.size() == 200 * 8);
}

TEST_CASE("treated share tracks the mixture's analytic mass") {
    SynthSpec spec;
    spec.n_bidders = 10;
    spec.n_hours = 1000;  // 10k bidder-hours
    spec.seed = 21;
    auto [rows, truth] = generate_panel(spec);
    CHECK(spec.score.analytic_treated_share() == doctest::Approx(0.12));
    std::size_t treated = 0;
    for (const auto& t : truth.treatment) treated += t.treated ? 1 : 0;
    const double share = static_cast<double>(treated) / truth.treatment.size();
    CHECK(share > 0.10);
    CHECK(share < 0.14);
    // Treatment flags agree between truth rows and panel rows.
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK((rows[i].treatment > 0.5) == truth.treatment[i].treated);
    }
}

TEST_CASE("spec validation rejects bad inputs") {
    SynthSpec spec = small_spec();
    SUBCASE("n_hours") { spec.n_hours = 0; }
    SUBCASE("n_bidders") { spec.n_bidders = 0; }
    SUBCASE("sigma_eps") { spec.sigma_eps = -1.0; }
    SUBCASE("phi out of range") { spec.ref_process.phi = 1.0; }
    SUBCASE("max_segments") { spec.max_segments = 0; }
    SUBCASE("near_mass") { spec.score.near_mass = 1.5; }
    SUBCASE("tau_by_bidder length") { spec.tau_by_bidder = {1.0, 2.0}; }
    SUBCASE("utilization window") { spec.util_normal_low = 0.95; spec.util_normal_high = 0.9; }
    CHECK_THROWS_AS(generate_panel(spec), AmpError);
}

// ===== perturb =====

TEST_CASE("CALM perturbation is the identity") {
    auto [data, truth] = generate(small_spec(17));
    auto [calm, report] = perturb_with_report(data, PerturbScenario::Calm);
    CHECK(report.spikes.empty());
    CHECK(report.withheld.empty());
    REQUIRE(calm.offers.size() == data.offers.size());
    for (std::size_t i = 0; i < data.offers.size(); ++i) {
        CHECK(calm.offers[i].price == data.offers[i].price);
        CHECK(calm.offers[i].status == data.offers[i].status);
    }
}

TEST_CASE("WITHHOLD flags whole units unavailable and depresses the RSI") {
    SynthSpec spec;
    spec.n_bidders = 10;
    spec.n_hours = 100 * kHoursPerDay;  // enough room past the warm-up
    spec.seed = 5;
    auto [data, truth] = generate(spec);
    PerturbOptions opts;
    opts.n_withhold = 5;
    auto [bent, report] = perturb_with_report(data, PerturbScenario::Withhold, opts);
    REQUIRE(report.withheld.size() == 5);

    ScoreSeries before = market_rsi_series(data);
    ScoreSeries after = market_rsi_series(bent);
    std::map<std::pair<HourId, std::string>, double> before_by_key;
    for (const auto& e : before.entries) before_by_key[{e.hour, e.bidder_id}] = e.value;

    const HourId first_eligible = data.hours().front() + 90 * kHoursPerDay;
    for (const auto& [hour, unit] : report.withheld) {
        CHECK(hour >= first_eligible);
        // Every row of the withheld unit-hour is UNAVAILABLE.
        for (const auto& o : bent.offers) {
            if (o.hour == hour && o.unit_id == unit) {
                CHECK(o.status == OfferStatus::Unavailable);
            }
        }
        // Other firms' RSI weakly decreases at the withheld hour.
        const std::string& owner = data.unit_to_bidder.at(unit);
        for (const auto& e : after.entries) {
            if (e.hour != hour || e.bidder_id == owner) continue;
            CHECK(e.value <= before_by_key.at({e.hour, e.bidder_id}) + 1e-12);
        }
    }
}

TEST_CASE("SPIKE edits fail the baseline conduct test at their hours") {
    SynthSpec spec;
    spec.n_bidders = 12;
    spec.n_hours = 150 * kHoursPerDay;
    spec.seed = 42;
    auto [data, truth] = generate(spec);
    PerturbOptions opts;
    opts.n_fail_all = 1;
    opts.n_conduct_margin = 2;
    opts.n_impact_margin = 1;
    opts.n_nonpivotal = 2;
    auto [bent, report] = perturb_with_report(data, PerturbScenario::Spike, opts);
    REQUIRE(report.spikes.size() == 6);

    std::map<SpikeClass, int> counts;
    for (const auto& s : report.spikes) counts[s.klass]++;
    CHECK(counts[SpikeClass::FailAll] == 1);
    CHECK(counts[SpikeClass::ConductMargin] == 2);
    CHECK(counts[SpikeClass::ImpactMargin] == 1);
    CHECK(counts[SpikeClass::NonPivotal] == 2);

    // Each edited unit-hour's top economic bid now sits at the edit price,
    // and untouched hours are bit-identical.
    std::set<HourId> edited_hours;
    for (const auto& s : report.spikes) edited_hours.insert(s.hour);
    ReferenceLevels refs = compute_reference_levels(bent);
    AmpConfig base;  // Table-style defaults
    for (const auto& s : report.spikes) {
        auto offers = bent.offers_at(s.hour);
        std::vector<IncrementalOffer> unit;
        for (const auto& o : offers) {
            if (o.unit_id == s.unit_id) unit.push_back(o);
        }
        REQUIRE_FALSE(unit.empty());
        auto bid = max_economic_bid(unit);
        REQUIRE(bid.has_value());
        CHECK(*bid == doctest::Approx(s.price));
        // The conduct test fails under baseline thresholds for every class
        // except ImpactMargin (which straddles only the lowered impact runs).
        if (s.klass == SpikeClass::FailAll || s.klass == SpikeClass::NonPivotal) {
            auto ref = refs.at(s.unit_id, s.hour);
            REQUIRE(ref.has_value());
            CHECK(conduct_test(*bid, conduct_threshold_isone(*ref, base)) == Verdict::Fail);
        }
    }
    for (std::size_t i = 0; i < data.offers.size(); ++i) {
        if (edited_hours.count(data.offers[i].hour)) continue;
        CHECK(bent.offers[i].price == data.offers[i].price);
    }
}
