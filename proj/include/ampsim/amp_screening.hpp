#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"
#include "ampsim/market_clearing.hpp"
#include "ampsim/structural_indices.hpp"

namespace ampsim {

enum class Verdict { Pass, Fail };

// Which market's conduct-threshold formula applies to screened units.
enum class ConductRule { IsoNe, Nyiso };

// Base price for the percentage leg of the impact tolerance. The mitigated
// (counterfactual) price is the default reading.
enum class ImpactBase { Mitigated, Unmitigated };

struct StructuralConfig {
    ScoreKind kind = ScoreKind::Rsi;
    double cutoff = 1.0;
    TreatedSide treated_side = TreatedSide::Leq;
    bool enabled = true;
};

// Market-level inputs for the NYISO-style area tolerance.
struct NyisoAreaRule {
    double pct = 0.02;
    double hours_per_year = 8760.0;
    double avg_price = 0.0;          // 12-month average price of the area
    double constrained_hours = 1.0;  // congested hours over the lookback year
    std::optional<double> unit_threshold;  // unit-specific tolerance, if any
};

struct AmpConfig {
    StructuralConfig structural;
    double conduct_abs = 100.0;  // $/MWh
    double conduct_pct = 3.0;    // fraction of ref added on top (a "300% increase")
    double impact_abs = 100.0;   // $/MWh
    double impact_pct = 2.0;     // fraction of the impact base price
    ImpactBase impact_base = ImpactBase::Mitigated;
    ConductRule conduct_rule = ConductRule::IsoNe;
    std::optional<NyisoAreaRule> nyiso_area_rule;
};

// ref + min(conduct_abs, conduct_pct * ref): the bid cap a screened unit's
// maximum economic bid is held against. The optional overload throws
// MissingReference so callers that must not silently skip can surface it.
double conduct_threshold_isone(double ref, const AmpConfig& cfg);
double conduct_threshold_isone(std::optional<double> ref, const AmpConfig& cfg);

// Additive area tolerance: pct * avg_price * hours_per_year /
// constrained_hours, floored by the unit-specific tolerance when present.
// The unit's bid cap is its reference level plus this value.
double conduct_threshold_nyiso(double avg_price, double constrained_hours,
                               std::optional<double> unit_threshold = std::nullopt,
                               double pct = 0.02, double hours_per_year = 8760.0);

// FAIL iff max_bid > threshold (boundary passes).
Verdict conduct_test(double max_bid, double threshold);

// FAIL iff unmitigated - mitigated > min(impact_abs, impact_pct * base).
Verdict impact_test(double unmitigated_price, double mitigated_price, const AmpConfig& cfg);

struct ScreeningOutcome {
    HourId hour = 0;
    bool structural_failed = false;  // some screened entity exists this hour
    std::set<std::string> conduct_failures;
    bool impact_failed = false;
    bool mitigated = false;
    double original_price = 0.0;   // P* from the as-bid stack
    double mitigated_price = 0.0;  // re-cleared counterfactual; = original when
                                   // no conduct failure occurred
    std::vector<StackSegment> mitigated_offers;

    // Market price the hour settles at under this outcome.
    double effective_price() const { return mitigated ? mitigated_price : original_price; }
};

// Scores feeding the structural test for one hour: per-bidder values for
// bidder-level kinds (RSI), a single market-level value for congestion.
// Entities without a score are not screened.
struct HourScores {
    std::map<std::string, double> by_bidder;
    std::optional<double> market_level;
};

using ClearingFn =
    std::function<ClearingResult(std::span<const StackSegment>, double load)>;

// The full three-step pipeline for one hour:
//   1. structural test (skipped when disabled: every unit is screened),
//   2. conduct test on each screened unit's max economic bid,
//   3. rebuild the stack with min(original, reference) prices on every
//      segment of each conduct-failing unit, re-clear, impact test.
// Units with a missing reference level are exempt from the conduct test.
ScreeningOutcome screen_hour(std::span<const IncrementalOffer> offers_at_hour,
                             const std::map<std::string, std::optional<double>>& references_at_hour,
                             const HourScores& scores_at_hour, double load,
                             const ClearingFn& clearing, const AmpConfig& cfg);

}  // namespace ampsim
