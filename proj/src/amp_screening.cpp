#include "ampsim/amp_screening.hpp"

#include <algorithm>
#include <cmath>

#include "ampsim/errors.hpp"

namespace ampsim {
namespace {

bool treated(double score, const StructuralConfig& s) {
    return s.treated_side == TreatedSide::Leq ? score <= s.cutoff : score >= s.cutoff;
}

void check_thresholds(const AmpConfig& cfg) {
    if (cfg.conduct_abs <= 0.0 || cfg.conduct_pct <= 0.0 || cfg.impact_abs <= 0.0 ||
        cfg.impact_pct <= 0.0) {
        fail(Errc::InvalidSpec, "conduct/impact thresholds must be > 0");
    }
}

}  // namespace

double conduct_threshold_isone(double ref, const AmpConfig& cfg) {
    check_thresholds(cfg);
    if (ref < 0.0) fail(Errc::NegativeInput, "reference level must be >= 0");
    return ref + std::min(cfg.conduct_abs, cfg.conduct_pct * ref);
}

double conduct_threshold_isone(std::optional<double> ref, const AmpConfig& cfg) {
    if (!ref) fail(Errc::MissingReference, "unit has no reference level this hour");
    return conduct_threshold_isone(*ref, cfg);
}

double conduct_threshold_nyiso(double avg_price, double constrained_hours,
                               std::optional<double> unit_threshold, double pct,
                               double hours_per_year) {
    if (constrained_hours < 1.0) {
        fail(Errc::InvalidHours, "constrained hours must be >= 1");
    }
    if (avg_price <= 0.0) fail(Errc::NegativeInput, "average price must be > 0");
    if (pct <= 0.0 || hours_per_year <= 0.0) {
        fail(Errc::InvalidSpec, "pct and hours_per_year must be > 0");
    }
    const double area = pct * avg_price * hours_per_year / constrained_hours;
    if (unit_threshold) return std::min(area, *unit_threshold);
    return area;
}

Verdict conduct_test(double max_bid, double threshold) {
    if (!std::isfinite(max_bid) || !std::isfinite(threshold)) {
        fail(Errc::MalformedRow, "conduct test on non-finite input");
    }
    return max_bid > threshold ? Verdict::Fail : Verdict::Pass;
}

Verdict impact_test(double unmitigated_price, double mitigated_price, const AmpConfig& cfg) {
    check_thresholds(cfg);
    const double base =
        cfg.impact_base == ImpactBase::Mitigated ? mitigated_price : unmitigated_price;
    const double tolerance = std::min(cfg.impact_abs, cfg.impact_pct * base);
    return (unmitigated_price - mitigated_price) > tolerance ? Verdict::Fail : Verdict::Pass;
}

ScreeningOutcome screen_hour(std::span<const IncrementalOffer> offers_at_hour,
                             const std::map<std::string, std::optional<double>>& references_at_hour,
                             const HourScores& scores_at_hour, double load,
                             const ClearingFn& clearing, const AmpConfig& cfg) {
    ScreeningOutcome out;
    if (!offers_at_hour.empty()) out.hour = offers_at_hour.front().hour;

    const std::vector<StackSegment> stack = build_stack(offers_at_hour);
    const ClearingResult unmitigated = clearing(stack, load);
    out.original_price = unmitigated.clearing_price;
    out.mitigated_price = unmitigated.clearing_price;
    out.mitigated_offers = stack;

    // Step 1: structural test. Disabled means every unit is screened (the
    // no-pivotality counterfactual); otherwise only units whose screening
    // entity (bidder for RSI, whole market for congestion) is on the treated
    // side of the cutoff move on to the conduct test.
    auto unit_screened = [&](const IncrementalOffer& o) -> bool {
        if (!cfg.structural.enabled) return true;
        switch (cfg.structural.kind) {
            case ScoreKind::Rsi: {
                auto it = scores_at_hour.by_bidder.find(o.bidder_id);
                return it != scores_at_hour.by_bidder.end() && treated(it->second, cfg.structural);
            }
            case ScoreKind::Congestion:
                return scores_at_hour.market_level &&
                       treated(*scores_at_hour.market_level, cfg.structural);
        }
        return false;
    };

    // Step 2: conduct test per screened unit on its max economic bid.
    std::size_t i = 0;
    while (i < offers_at_hour.size()) {
        std::size_t j = i;
        while (j < offers_at_hour.size() &&
               offers_at_hour[j].unit_id == offers_at_hour[i].unit_id) {
            ++j;
        }
        const auto unit_offers = offers_at_hour.subspan(i, j - i);
        const auto& head = unit_offers.front();
        const bool screened = unit_screened(head);
        out.structural_failed = out.structural_failed || screened;
        if (screened) {
            auto ref_it = references_at_hour.find(head.unit_id);
            std::optional<double> ref;
            if (ref_it != references_at_hour.end()) ref = ref_it->second;
            const std::optional<double> max_bid = max_economic_bid(unit_offers);
            if (ref && max_bid) {  // missing reference or no economic bid: exempt
                double threshold = 0.0;
                switch (cfg.conduct_rule) {
                    case ConductRule::IsoNe:
                        threshold = conduct_threshold_isone(*ref, cfg);
                        break;
                    case ConductRule::Nyiso: {
                        const NyisoAreaRule rule = cfg.nyiso_area_rule.value_or(NyisoAreaRule{});
                        threshold = *ref + conduct_threshold_nyiso(rule.avg_price,
                                                                   rule.constrained_hours,
                                                                   rule.unit_threshold, rule.pct,
                                                                   rule.hours_per_year);
                        break;
                    }
                }
                if (conduct_test(*max_bid, threshold) == Verdict::Fail) {
                    out.conduct_failures.insert(head.unit_id);
                }
            }
        }
        i = j;
    }
    if (out.conduct_failures.empty()) return out;

    // Step 3: mitigate every segment of each failing unit to min(original,
    // reference), re-clear, and test the price impact.
    std::vector<StackSegment> mitigated = stack;
    for (auto& seg : mitigated) {
        if (!out.conduct_failures.count(seg.unit_id)) continue;
        const auto ref_it = references_at_hour.find(seg.unit_id);
        // A unit only reaches this point with a present reference.
        seg.price = std::min(seg.price, *ref_it->second);
    }
    const ClearingResult re_cleared = clearing(mitigated, load);
    out.mitigated_price = re_cleared.clearing_price;
    out.mitigated_offers = std::move(mitigated);
    out.impact_failed =
        impact_test(out.original_price, out.mitigated_price, cfg) == Verdict::Fail;
    out.mitigated = out.impact_failed;
    return out;
}

}  // namespace ampsim
