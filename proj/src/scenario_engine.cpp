#include "ampsim/scenario_engine.hpp"

#include <algorithm>

#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/market_clearing.hpp"
#include "ampsim/parallel.hpp"
#include "ampsim/stats.hpp"

namespace ampsim {
namespace {

std::uint64_t hour_list_digest(const std::vector<HourId>& hours) {
    std::string bytes;
    bytes.reserve(hours.size() * sizeof(HourId));
    for (HourId h : hours) {
        for (std::size_t b = 0; b < sizeof(HourId); ++b) {
            bytes.push_back(static_cast<char>((static_cast<std::uint64_t>(h) >> (8 * b)) & 0xff));
        }
    }
    return csv::fnv1a64(bytes);
}

}  // namespace

ScenarioReport run_scenario(const Dataset& data, const AmpConfig& cfg,
                            const std::set<HourId>& excluded_hours, std::string name,
                            const ScenarioOptions& options) {
    ScenarioReport report;
    report.name = std::move(name);
    report.config = cfg;

    std::vector<HourId> included;
    for (const auto& m : data.market) {
        if (excluded_hours.count(m.hour)) {
            ++report.excluded_hours;
        } else {
            included.push_back(m.hour);
        }
    }
    report.included_hours = included.size();
    report.run_key = hour_list_digest(included);
    if (included.empty()) return report;

    const ReferenceLevels refs = compute_reference_levels(data, options.ref_window_days,
                                                          options.ref_band, options.threads);

    // Score lookups per hour for the configured structural kind.
    std::map<HourId, HourScores> scores;
    if (cfg.structural.enabled) {
        if (cfg.structural.kind == ScoreKind::Rsi) {
            for (const auto& e : market_rsi_series(data, options.must_take).entries) {
                scores[e.hour].by_bidder.emplace(e.bidder_id, e.value);
            }
        } else {
            for (const auto& e : congestion_series(data).entries) {
                scores[e.hour].market_level = e.value;
            }
        }
    }

    const ClearingFn clearing = [](std::span<const StackSegment> stack, double load) {
        return clear(stack, load);
    };

    report.hours.resize(included.size());
    const HourScores no_scores;
    detail::parallel_chunks(included.size(), options.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const HourId t = included[i];
            const MarketHourRecord* m = data.market_at(t);
            const auto offers = data.offers_at(t);
            const auto score_it = scores.find(t);
            const ScreeningOutcome outcome = screen_hour(
                offers, refs.row_at(t), score_it == scores.end() ? no_scores : score_it->second,
                m->load_forecast, clearing, cfg);
            report.hours[i] = {t, outcome.original_price, outcome.mitigated_price,
                               outcome.mitigated};
        }
    });

    stats::NeumaierSum surplus;
    stats::NeumaierSum decrease;
    stats::NeumaierSum effective;
    for (const auto& h : report.hours) {
        effective.add(h.mitigated ? h.p_mitigated : h.p_star);
        if (!h.mitigated) continue;
        report.mitigated_hours.insert(h.hour);
        const MarketHourRecord* m = data.market_at(h.hour);
        const double demand = options.demand == DemandField::LoadForecast
                                  ? m->load_forecast
                                  : m->load_forecast + m->reserves;
        surplus.add(demand * (h.p_star - h.p_mitigated));
        decrease.add(h.p_star - h.p_mitigated);
    }
    report.avg_clearing_price = effective.value() / static_cast<double>(included.size());
    report.total_surplus_increase = surplus.value();
    const std::size_t n_mitigated = report.mitigated_hours.size();
    if (n_mitigated > 0) {
        report.avg_price_decrease = decrease.value() / static_cast<double>(n_mitigated);
        report.per_hour_surplus =
            report.total_surplus_increase / static_cast<double>(n_mitigated);
    }
    return report;
}

ScenarioDelta compare_scenarios(const ScenarioReport& baseline, const ScenarioReport& alt) {
    if (baseline.run_key != alt.run_key || baseline.included_hours != alt.included_hours) {
        fail(Errc::MismatchedRuns, "scenario reports cover different included-hour sets");
    }
    ScenarioDelta d;
    d.mitigated_hours_delta = static_cast<long long>(alt.mitigated_hours.size()) -
                              static_cast<long long>(baseline.mitigated_hours.size());
    d.avg_price_delta = alt.avg_clearing_price - baseline.avg_clearing_price;
    d.surplus_delta = alt.total_surplus_increase - baseline.total_surplus_increase;
    d.per_mitigated_hour_surplus = alt.per_hour_surplus;
    return d;
}

AmpConfig preset_config(const std::string& name) {
    AmpConfig cfg;  // baseline: conduct 100 or 300%, impact 100 or 200%
    if (name == "baseline") return cfg;
    if (name == "lower-conduct") {
        cfg.conduct_abs = 50.0;
        cfg.conduct_pct = 1.5;
        return cfg;
    }
    if (name == "lower-impact") {
        cfg.impact_abs = 50.0;
        cfg.impact_pct = 1.5;
        return cfg;
    }
    if (name == "lower-both") {
        cfg.conduct_abs = 75.0;
        cfg.conduct_pct = 2.0;
        cfg.impact_abs = 90.0;
        cfg.impact_pct = 1.75;
        return cfg;
    }
    if (name == "no-pivotality") {
        cfg.structural.enabled = false;
        return cfg;
    }
    fail(Errc::InvalidSpec, "unknown scenario preset '" + name + "'");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"baseline", "lower-conduct", "lower-impact",
                                                   "lower-both", "no-pivotality"};
    return names;
}

}  // namespace ampsim
