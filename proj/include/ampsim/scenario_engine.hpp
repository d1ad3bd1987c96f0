#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ampsim/amp_screening.hpp"
#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"
#include "ampsim/reference_levels.hpp"
#include "ampsim/structural_indices.hpp"

namespace ampsim {

// Which market-record column plays D_t in the surplus formula
// sum over mitigated hours of D_t * (P*_t - P^m_t).
enum class DemandField { LoadForecast, LoadPlusReserves };

struct ScenarioOptions {
    DemandField demand = DemandField::LoadForecast;
    MustTakeRule must_take = MustTakeRule::MaxOutput;
    int ref_window_days = kDefaultRefWindowDays;
    EconomicBand ref_band{};
    int threads = 1;
};

struct ScenarioHourDetail {
    HourId hour = 0;
    double p_star = 0.0;       // unmitigated clearing price
    double p_mitigated = 0.0;  // counterfactual price (= p_star when no conduct failure)
    bool mitigated = false;
};

struct ScenarioReport {
    std::string name;
    AmpConfig config;
    std::set<HourId> mitigated_hours;
    double avg_clearing_price = 0.0;  // effective prices over included hours
    std::optional<double> avg_price_decrease;  // mean P*-P^m over mitigated hours
    double total_surplus_increase = 0.0;       // sum D_t*(P*-P^m), compensated
    double per_hour_surplus = 0.0;             // total / |M|, 0 when M empty
    std::size_t included_hours = 0;
    std::size_t excluded_hours = 0;
    std::uint64_t run_key = 0;  // digest of the included-hour list, for
                                // detecting cross-filter comparisons
    std::vector<ScenarioHourDetail> hours;  // one row per included hour
};

// Runs the full per-hour pipeline (clear, screen, re-clear when needed) over
// every market hour not in `excluded_hours` and aggregates the report.
// Clearing/screening errors propagate. Bit-for-bit reproducible for a given
// dataset, config, and options, regardless of thread count.
ScenarioReport run_scenario(const Dataset& data, const AmpConfig& cfg,
                            const std::set<HourId>& excluded_hours, std::string name = "",
                            const ScenarioOptions& options = {});

struct ScenarioDelta {
    long long mitigated_hours_delta = 0;  // alt - baseline
    double avg_price_delta = 0.0;
    double surplus_delta = 0.0;
    double per_mitigated_hour_surplus = 0.0;  // alt total / |M_alt|, 0 when empty
};

// Throws MismatchedRuns when the two reports were built over different
// included-hour sets.
ScenarioDelta compare_scenarios(const ScenarioReport& baseline, const ScenarioReport& alt);

// Named threshold presets for the counterfactual grid: "baseline",
// "lower-conduct", "lower-impact", "lower-both", "no-pivotality".
AmpConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

}  // namespace ampsim
