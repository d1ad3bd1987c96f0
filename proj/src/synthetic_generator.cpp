#include "ampsim/synthetic_generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "ampsim/amp_screening.hpp"
#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/market_clearing.hpp"
#include "ampsim/reference_levels.hpp"
#include "ampsim/scenario_engine.hpp"

namespace ampsim {
namespace {

// Hand-rolled draws on top of the standard engine: the standard library's
// distribution objects are implementation-defined, these are not, so a seed
// pins the dataset bytes on any toolchain.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }
    int uniform_int(int lo, int hi) {  // inclusive
        const int span = hi - lo + 1;
        int v = lo + static_cast<int>(uniform() * span);
        return std::min(v, hi);
    }
};

constexpr std::uint64_t kMarketStreamSalt = 0x9e3779b97f4a7c15ull;

void validate_spec(const SynthSpec& s) {
    auto bad = [](const std::string& what) { fail(Errc::InvalidSpec, what); };
    if (s.n_bidders < 1) bad("n_bidders must be >= 1");
    if (s.units_per_bidder < 1) bad("units_per_bidder must be >= 1");
    if (s.n_hours < 1) bad("n_hours must be >= 1");
    if (s.sigma_eps < 0.0 || s.sigma_bidder < 0.0) bad("noise sds must be >= 0");
    if (!s.tau_by_bidder.empty() &&
        s.tau_by_bidder.size() != static_cast<std::size_t>(s.n_bidders)) {
        bad("tau_by_bidder must have one entry per bidder");
    }
    const auto& sc = s.score;
    if (sc.near_mass < 0.0 || sc.treated_tail_mass < 0.0 ||
        sc.near_mass + sc.treated_tail_mass > 1.0) {
        bad("score mixture masses must be >= 0 and sum to <= 1");
    }
    if (sc.near_halfwidth < 0.0 || sc.tail_offset < 0.0 || sc.tail_mean <= 0.0) {
        bad("score mixture geometry must be positive");
    }
    if (s.max_segments < 1 || s.max_segments > kSegmentCapTwelveStep) {
        bad("max_segments must be in 1..12");
    }
    if (s.capacity_low <= 0.0 || s.capacity_high < s.capacity_low) bad("bad capacity range");
    if (s.beta0_high < s.beta0_low) bad("bad beta0 range");
    if (s.segment_gap_low < 0.0 || s.segment_gap_high < s.segment_gap_low) {
        bad("bad segment gap range");
    }
    auto ordered01 = [](double lo, double hi) { return 0.0 < lo && lo <= hi && hi < 1.0; };
    if (!ordered01(s.util_normal_low, s.util_normal_high) ||
        !ordered01(s.util_tight_low, s.util_tight_high)) {
        bad("utilization ranges must lie inside (0,1)");
    }
    if (s.tight_full_share < 0.0 || s.tight_partial_share < 0.0 ||
        s.tight_full_share + s.tight_partial_share > 1.0) {
        bad("tight-hour shares must be >= 0 and sum to <= 1");
    }
    if (s.partial_offer_fraction <= 0.0 || s.partial_offer_fraction > 1.0) {
        bad("partial_offer_fraction must be in (0,1]");
    }
    if (s.reserve_fraction < 0.0) bad("reserve_fraction must be >= 0");
    if (s.ref_process.phi < 0.0 || s.ref_process.phi >= 1.0 || s.gas_process.phi < 0.0 ||
        s.gas_process.phi >= 1.0) {
        bad("AR(1) phi must be in [0,1)");
    }
    if (s.ref_process.sigma < 0.0 || s.gas_process.sigma < 0.0) bad("AR(1) sigma must be >= 0");
}

std::string padded_id(const char* prefix, int index, int count) {
    std::size_t width = 1;
    for (int c = count; c >= 10; c /= 10) ++width;
    width = std::max<std::size_t>(width, 2);
    std::string digits = std::to_string(index + 1);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

double draw_score(Rng& rng, const ScoreMixtureSpec& sc) {
    const double u = rng.uniform();
    const double sign_untreated = sc.treated_side == TreatedSide::Leq ? 1.0 : -1.0;
    if (u < sc.near_mass) {
        return sc.cutoff + rng.uniform(-sc.near_halfwidth, sc.near_halfwidth);
    }
    if (u < sc.near_mass + sc.treated_tail_mass) {
        return sc.cutoff - sign_untreated * (sc.tail_offset + rng.exponential(sc.tail_mean));
    }
    return sc.cutoff + sign_untreated * (sc.tail_offset + rng.exponential(sc.tail_mean));
}

double evolve_ar1(Rng& rng, const Ar1Spec& p, double mean, double state) {
    const double next = mean + p.phi * (state - mean) + p.sigma * rng.normal();
    return std::max(next, p.floor);
}

double stationary_init(Rng& rng, const Ar1Spec& p, double mean) {
    const double sd = p.sigma / std::sqrt(std::max(1e-12, 1.0 - p.phi * p.phi));
    return std::max(mean + sd * rng.normal(), p.floor);
}

struct PanelBuild {
    std::vector<rdd::ObservationRow> rows;  // hour-major, bidder-major, unit order
    GroundTruth truth;
};

PanelBuild build_panel(const SynthSpec& spec) {
    validate_spec(spec);
    Rng rng(spec.seed);
    PanelBuild out;
    auto& truth = out.truth;
    const int n_units = spec.n_bidders * spec.units_per_bidder;

    truth.beta2 = spec.beta2;
    truth.beta3 = spec.beta3;
    truth.beta4 = spec.beta4;
    truth.beta5 = spec.beta5;
    truth.bidder_ids.reserve(static_cast<std::size_t>(spec.n_bidders));
    for (int b = 0; b < spec.n_bidders; ++b) {
        truth.bidder_ids.push_back(padded_id("B", b, spec.n_bidders));
        truth.beta0_by_bidder.push_back(rng.uniform(spec.beta0_low, spec.beta0_high));
        truth.bidder_effect.push_back(spec.sigma_bidder * rng.normal());
        truth.tau_by_bidder.push_back(
            spec.tau_by_bidder.empty() ? spec.tau : spec.tau_by_bidder[static_cast<std::size_t>(b)]);
    }
    std::vector<std::string> unit_ids(static_cast<std::size_t>(n_units));
    std::vector<double> ref_mean(static_cast<std::size_t>(n_units));
    std::vector<double> ref_state(static_cast<std::size_t>(n_units));
    const int n_cheap = static_cast<int>(spec.cheap_unit_share * n_units);
    for (int g = 0; g < n_units; ++g) {
        const int b = g / spec.units_per_bidder;
        const int u = g % spec.units_per_bidder;
        unit_ids[static_cast<std::size_t>(g)] =
            truth.bidder_ids[static_cast<std::size_t>(b)] +
            padded_id("U", u, spec.units_per_bidder);
        const bool cheap = g < n_cheap;
        const double center = cheap ? spec.cheap_ref_mean + rng.uniform(-2.0, 2.0)
                                    : spec.ref_process.mean +
                                          rng.uniform(-spec.ref_mean_spread, spec.ref_mean_spread);
        ref_mean[static_cast<std::size_t>(g)] = center;
        ref_state[static_cast<std::size_t>(g)] = stationary_init(rng, spec.ref_process, center);
    }
    double gas_state = stationary_init(rng, spec.gas_process, spec.gas_process.mean);

    out.rows.reserve(static_cast<std::size_t>(spec.n_hours) * static_cast<std::size_t>(n_units));
    truth.treatment.reserve(static_cast<std::size_t>(spec.n_hours) *
                            static_cast<std::size_t>(spec.n_bidders));
    for (int t = 0; t < spec.n_hours; ++t) {
        const HourId hour = spec.start_hour + t;
        gas_state = evolve_ar1(rng, spec.gas_process, spec.gas_process.mean, gas_state);
        for (int b = 0; b < spec.n_bidders; ++b) {
            const double score = draw_score(rng, spec.score);
            const auto [centered, treated] =
                rdd::center_score(score, spec.score.cutoff, spec.score.treated_side);
            const double tau_b = truth.tau_by_bidder[static_cast<std::size_t>(b)];
            truth.treatment.push_back(
                {hour, truth.bidder_ids[static_cast<std::size_t>(b)], score, treated == 1, tau_b});
            for (int u = 0; u < spec.units_per_bidder; ++u) {
                const int g = b * spec.units_per_bidder + u;
                auto& ref = ref_state[static_cast<std::size_t>(g)];
                ref = evolve_ar1(rng, spec.ref_process, ref_mean[static_cast<std::size_t>(g)], ref);
                const double eps = spec.sigma_eps * rng.normal();
                const double p_max = truth.beta0_by_bidder[static_cast<std::size_t>(b)] +
                                     tau_b * treated + spec.beta2 * centered +
                                     spec.beta3 * centered * treated + spec.beta4 * ref +
                                     spec.beta5 * gas_state +
                                     truth.bidder_effect[static_cast<std::size_t>(b)] + eps;
                rdd::ObservationRow row;
                row.hour = hour;
                row.bidder_id = truth.bidder_ids[static_cast<std::size_t>(b)];
                row.unit_id = unit_ids[static_cast<std::size_t>(g)];
                row.p_max = p_max;
                row.score = score;
                row.centered_score = centered;
                row.treatment = treated;
                row.ref = ref;
                row.gas = gas_state;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace

std::pair<std::vector<rdd::ObservationRow>, GroundTruth> generate_panel(const SynthSpec& spec) {
    PanelBuild built = build_panel(spec);
    built.truth.panel = built.rows;
    return {std::move(built.rows), std::move(built.truth)};
}

std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec) {
    PanelBuild built = build_panel(spec);
    const int n_units = spec.n_bidders * spec.units_per_bidder;
    Rng rng(spec.seed ^ kMarketStreamSalt);

    std::vector<double> capacity(static_cast<std::size_t>(n_units));
    for (int g = 0; g < n_units; ++g) {
        capacity[static_cast<std::size_t>(g)] = rng.uniform(spec.capacity_low, spec.capacity_high);
    }

    std::vector<IncrementalOffer> offers;
    offers.reserve(built.rows.size() * static_cast<std::size_t>((1 + spec.max_segments) / 2 + 1));
    std::vector<MarketHourRecord> market;
    market.reserve(static_cast<std::size_t>(spec.n_hours));

    std::vector<double> seg_weight(static_cast<std::size_t>(spec.max_segments));
    std::vector<double> seg_gap(static_cast<std::size_t>(spec.max_segments));
    for (int t = 0; t < spec.n_hours; ++t) {
        const HourId hour = spec.start_hour + t;
        const double regime = rng.uniform();
        double util = 0.0;
        double offer_fraction = 1.0;
        if (regime < spec.tight_full_share) {
            util = rng.uniform(spec.util_tight_low, spec.util_tight_high);
        } else if (regime < spec.tight_full_share + spec.tight_partial_share) {
            util = rng.uniform(spec.util_tight_low, spec.util_tight_high);
            offer_fraction = spec.partial_offer_fraction;
        } else {
            util = rng.uniform(spec.util_normal_low, spec.util_normal_high);
        }

        double stack_total = 0.0;
        double gas = 0.0;
        for (int g = 0; g < n_units; ++g) {
            const auto& panel_row =
                built.rows[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_units) +
                           static_cast<std::size_t>(g)];
            gas = panel_row.gas;
            const int n_seg = rng.uniform_int(1, spec.max_segments);
            double weight_sum = 0.0;
            for (int k = 0; k < n_seg; ++k) {
                seg_weight[static_cast<std::size_t>(k)] = rng.uniform(0.5, 1.5);
                weight_sum += seg_weight[static_cast<std::size_t>(k)];
            }
            for (int k = 0; k + 1 < n_seg; ++k) {
                seg_gap[static_cast<std::size_t>(k)] =
                    rng.uniform(spec.segment_gap_low, spec.segment_gap_high);
            }
            const double offered = capacity[static_cast<std::size_t>(g)] * offer_fraction;
            stack_total += offered;
            // Top step price is the DGP maximum bid; lower steps descend by
            // the drawn gaps, so the curve is nondecreasing in segment index.
            double price = panel_row.p_max;
            std::vector<double> prices(static_cast<std::size_t>(n_seg));
            for (int k = n_seg - 1; k >= 0; --k) {
                prices[static_cast<std::size_t>(k)] = price;
                if (k > 0) price -= seg_gap[static_cast<std::size_t>(k - 1)];
            }
            for (int k = 0; k < n_seg; ++k) {
                IncrementalOffer o;
                o.hour = hour;
                o.unit_id = panel_row.unit_id;
                o.bidder_id = panel_row.bidder_id;
                o.segment = k + 1;
                o.price = prices[static_cast<std::size_t>(k)];
                o.quantity = offered * seg_weight[static_cast<std::size_t>(k)] / weight_sum;
                o.status = OfferStatus::Economic;
                o.max_output = capacity[static_cast<std::size_t>(g)];
                offers.push_back(std::move(o));
            }
        }

        MarketHourRecord m;
        m.hour = hour;
        m.load_forecast = util * stack_total;
        m.reserves = spec.reserve_fraction * m.load_forecast;
        m.gas_price = gas;
        static const char* kAreaNames[3] = {"NORTH", "SOUTH", "METRO"};
        static const double kAreaShare[3] = {0.55, 0.35, 0.10};
        for (int a = 0; a < 3; ++a) {
            AreaRecord area;
            area.area_id = kAreaNames[a];
            area.load = kAreaShare[a] * m.load_forecast;
            area.shadow_price = rng.uniform() < spec.congestion_event_prob
                                    ? rng.exponential(spec.congestion_shadow_mean)
                                    : 0.0;
            area.is_excluded = a == 2;  // metro-style area left out of the index
            m.areas.push_back(std::move(area));
        }
        market.push_back(std::move(m));
    }

    GroundTruth truth = std::move(built.truth);
    truth.panel = std::move(built.rows);
    Dataset data = assemble_dataset(std::move(offers), std::move(market), kSegmentCapTwelveStep);
    return {std::move(data), std::move(truth)};
}

void write_truth_csv(const std::filesystem::path& path, const GroundTruth& truth) {
    csv::Writer w({"hour", "bidder_id", "treated", "tau"});
    for (const auto& row : truth.treatment) {
        w.add_row({format_hour(row.hour), row.bidder_id, row.treated ? "true" : "false",
                   csv::format_double(row.tau)});
    }
    w.save(path);
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

namespace {

// Mutable per-unit offer history used to recompute reference levels cheaply
// while edits are applied hour by hour.
struct UnitHistory {
    std::vector<std::size_t> offer_index;  // into Dataset::offers, hour-ascending
};

std::optional<double> history_ref_at(const Dataset& data, const UnitHistory& h, HourId t,
                                     int window_days, const EconomicBand& band) {
    const HourId start = t - static_cast<HourId>(window_days) * kHoursPerDay;
    long double pq = 0.0L, q = 0.0L;
    for (std::size_t idx : h.offer_index) {
        const auto& o = data.offers[idx];
        if (o.hour >= t) break;
        if (o.hour < start) continue;
        if (o.status != OfferStatus::Economic || o.quantity <= 0.0 || o.price < band.low ||
            o.price > band.high) {
            continue;
        }
        pq += static_cast<long double>(o.price) * static_cast<long double>(o.quantity);
        q += static_cast<long double>(o.quantity);
    }
    if (q <= 0.0L) return std::nullopt;
    return static_cast<double>(pq / q);
}

struct HourView {
    std::span<const IncrementalOffer> offers;
    std::vector<StackSegment> stack;
    double stack_quantity = 0.0;
    std::map<std::string, double> rsi_by_bidder;
    double min_rsi = 0.0;
    // Per unit: index of its top economic step in Dataset::offers and basics.
    struct UnitTop {
        std::string unit_id;
        std::string bidder_id;
        std::size_t offer_index = 0;  // absolute index of the top step
        double top_price = 0.0;
        double below_price = 0.0;  // price of the step under the top (or -inf)
        double top_quantity = 0.0;
    };
    std::vector<UnitTop> units;
};

HourView inspect_hour(const Dataset& data, const MarketHourRecord& m) {
    HourView v;
    v.offers = data.offers_at(m.hour);
    v.stack = build_stack(v.offers);
    for (const auto& s : v.stack) v.stack_quantity += s.quantity;
    const HourSupply supply = hour_supply(v.offers, MustTakeRule::MaxOutput);
    v.min_rsi = std::numeric_limits<double>::infinity();
    for (const auto& [bidder, firm] : supply.firm_supply_by_bidder) {
        const double r = rsi(supply.market_supply, firm, m.load_forecast, m.reserves);
        v.rsi_by_bidder.emplace(bidder, r);
        v.min_rsi = std::min(v.min_rsi, r);
    }
    const std::size_t base =
        static_cast<std::size_t>(v.offers.data() - data.offers.data());
    std::size_t i = 0;
    while (i < v.offers.size()) {
        std::size_t j = i;
        while (j < v.offers.size() && v.offers[j].unit_id == v.offers[i].unit_id) ++j;
        HourView::UnitTop top;
        top.unit_id = v.offers[i].unit_id;
        top.bidder_id = v.offers[i].bidder_id;
        double best = -std::numeric_limits<double>::infinity();
        double below = -std::numeric_limits<double>::infinity();
        std::size_t best_at = i;
        for (std::size_t k = i; k < j; ++k) {
            const auto& o = v.offers[k];
            if (o.status != OfferStatus::Economic || o.quantity <= 0.0) continue;
            if (o.price >= best) {
                below = best;
                best = o.price;
                best_at = k;
            } else {
                below = std::max(below, o.price);
            }
        }
        if (best > -std::numeric_limits<double>::infinity()) {
            top.offer_index = base + best_at;
            top.top_price = best;
            top.below_price = below;
            top.top_quantity = v.offers[best_at].quantity;
            v.units.push_back(std::move(top));
        }
        i = j;
    }
    return v;
}

const std::vector<AmpConfig>& preset_grid() {
    static const std::vector<AmpConfig> grid = [] {
        std::vector<AmpConfig> g;
        for (const auto& name : preset_names()) g.push_back(preset_config(name));
        return g;
    }();
    return grid;
}

// Expected per-preset mitigation pattern, in preset_names() order:
// baseline, lower-conduct, lower-impact, lower-both, no-pivotality.
std::array<bool, 5> expected_pattern(SpikeClass klass) {
    switch (klass) {
        case SpikeClass::FailAll: return {true, true, true, true, true};
        case SpikeClass::ConductMargin: return {false, true, false, true, false};
        case SpikeClass::ImpactMargin: return {false, false, true, false, false};
        case SpikeClass::NonPivotal: return {false, false, false, false, true};
    }
    return {};
}

}  // namespace

std::pair<Dataset, PerturbReport> perturb_with_report(const Dataset& data,
                                                      PerturbScenario scenario,
                                                      const PerturbOptions& options) {
    Dataset out = data;
    PerturbReport report;
    if (scenario == PerturbScenario::Calm || out.market.empty()) return {std::move(out), report};

    const HourId first_eligible =
        out.market.front().hour + static_cast<HourId>(options.warmup_days) * kHoursPerDay;

    if (scenario == PerturbScenario::Withhold) {
        int remaining = options.n_withhold;
        for (const auto& m : out.market) {
            if (remaining == 0) break;
            if (m.hour < first_eligible) continue;
            const auto offers = out.offers_at(m.hour);
            // Pick the biggest unit whose removal keeps a 2% supply cushion.
            std::string pick;
            double pick_offered = 0.0;
            double total = 0.0;
            std::map<std::string, double> offered_by_unit;
            for (const auto& o : offers) {
                if (o.status == OfferStatus::Unavailable) continue;
                offered_by_unit[o.unit_id] += o.quantity;
                total += o.quantity;
            }
            for (const auto& [unit, offered] : offered_by_unit) {
                if (total - offered < 1.02 * m.load_forecast) continue;
                if (offered > pick_offered) {
                    pick = unit;
                    pick_offered = offered;
                }
            }
            if (pick.empty()) continue;
            const std::size_t base =
                static_cast<std::size_t>(offers.data() - out.offers.data());
            for (std::size_t k = 0; k < offers.size(); ++k) {
                if (offers[k].unit_id == pick) {
                    out.offers[base + k].status = OfferStatus::Unavailable;
                }
            }
            report.withheld.emplace_back(m.hour, pick);
            --remaining;
        }
        if (remaining > 0) {
            fail(Errc::InvalidSpec, "could not place " + std::to_string(options.n_withhold) +
                                        " withheld hours; " + std::to_string(remaining) +
                                        " unfilled");
        }
        return {std::move(out), report};
    }

    // SPIKE. Hours are processed in ascending order so reference levels at a
    // candidate hour already reflect every earlier accepted edit; each
    // placement is verified against the real screening pipeline under all
    // presets before it is kept.
    const EconomicBand band{};
    const int window_days = options.warmup_days;
    std::map<std::string, UnitHistory> history;
    for (std::size_t i = 0; i < out.offers.size(); ++i) {
        history[out.offers[i].unit_id].offer_index.push_back(i);
    }

    struct Quota {
        SpikeClass klass;
        int remaining;
    };
    std::vector<Quota> pivotal_quotas = {{SpikeClass::FailAll, options.n_fail_all},
                                         {SpikeClass::ConductMargin, options.n_conduct_margin},
                                         {SpikeClass::ImpactMargin, options.n_impact_margin}};
    int nonpivotal_remaining = options.n_nonpivotal;
    std::set<std::string> used_inband_units;

    auto quotas_open = [&] {
        if (nonpivotal_remaining > 0) return true;
        for (const auto& q : pivotal_quotas) {
            if (q.remaining > 0) return true;
        }
        return false;
    };

    const ClearingFn clearing = [](std::span<const StackSegment> stack, double load) {
        return clear(stack, load);
    };

    for (const auto& m : out.market) {
        if (!quotas_open()) break;
        if (m.hour < first_eligible) continue;
        HourView view = inspect_hour(out, m);
        if (view.stack_quantity < m.load_forecast) continue;
        const double shortfall_slack = view.stack_quantity - m.load_forecast;

        std::vector<const HourView::UnitTop*> essential;
        for (const auto& u : view.units) {
            if (u.top_quantity > shortfall_slack) essential.push_back(&u);
        }
        if (essential.empty()) continue;
        std::sort(essential.begin(), essential.end(),
                  [](const HourView::UnitTop* a, const HourView::UnitTop* b) {
                      if (a->top_quantity != b->top_quantity) {
                          return a->top_quantity > b->top_quantity;
                      }
                      return a->unit_id < b->unit_id;
                  });

        // Reference levels for every unit this hour (edits so far included).
        std::map<std::string, std::optional<double>> refs;
        for (const auto& [unit, hist] : history) {
            refs.emplace(unit, history_ref_at(out, hist, m.hour, window_days, band));
        }
        HourScores scores;
        scores.by_bidder = view.rsi_by_bidder;

        auto verify_and_apply = [&](const HourView::UnitTop& unit, double new_price,
                                    SpikeClass klass) -> bool {
            const double old_price = out.offers[unit.offer_index].price;
            out.offers[unit.offer_index].price = new_price;
            const auto offers = out.offers_at(m.hour);
            const auto pattern = expected_pattern(klass);
            bool ok = true;
            for (std::size_t p = 0; ok && p < preset_grid().size(); ++p) {
                const ScreeningOutcome outcome = screen_hour(offers, refs, scores,
                                                             m.load_forecast, clearing,
                                                             preset_grid()[p]);
                ok = outcome.mitigated == pattern[p];
            }
            if (!ok) {
                out.offers[unit.offer_index].price = old_price;
                return false;
            }
            report.spikes.push_back({m.hour, unit.unit_id, new_price, klass});
            return true;
        };

        const bool any_pivotal_essential = std::any_of(
            essential.begin(), essential.end(), [&](const HourView::UnitTop* u) {
                return view.rsi_by_bidder.at(u->bidder_id) <= 1.0;
            });

        bool placed = false;
        if (view.min_rsi > 1.0 && nonpivotal_remaining > 0) {
            for (const auto* u : essential) {
                if (!refs.at(u->unit_id)) continue;
                if (options.spike_price <= u->top_price + 0.01) continue;
                if (verify_and_apply(*u, options.spike_price, SpikeClass::NonPivotal)) {
                    --nonpivotal_remaining;
                    placed = true;
                    break;
                }
            }
        } else if (any_pivotal_essential) {
            for (auto& quota : pivotal_quotas) {
                if (placed || quota.remaining == 0) continue;
                for (const auto* u : essential) {
                    if (view.rsi_by_bidder.at(u->bidder_id) > 1.0) continue;
                    const auto ref = refs.at(u->unit_id);
                    if (!ref) continue;
                    const bool in_band_edit = quota.klass != SpikeClass::FailAll;
                    if (in_band_edit && used_inband_units.count(u->unit_id)) continue;

                    double x = 0.0;
                    const AmpConfig base_cfg;  // baseline thresholds
                    const double thr_base = conduct_threshold_isone(*ref, base_cfg);
                    if (quota.klass == SpikeClass::FailAll) {
                        x = options.spike_price;
                        if (x <= thr_base + 0.25) continue;
                    } else {
                        // Mitigated counterfactual price if this unit alone
                        // fails conduct (independent of the spike height).
                        std::vector<StackSegment> mitigated = view.stack;
                        for (auto& seg : mitigated) {
                            if (seg.unit_id == u->unit_id) {
                                seg.price = std::min(seg.price, *ref);
                            }
                        }
                        const double p_m = clear(mitigated, m.load_forecast).clearing_price;
                        const double tol_base = std::min(100.0, 2.0 * p_m);
                        const double tol_lower = std::min(50.0, 1.5 * p_m);
                        const double tol_both = std::min(90.0, 1.75 * p_m);
                        if (quota.klass == SpikeClass::ConductMargin) {
                            if (*ref < 20.0) continue;
                            x = thr_base - 0.5;
                            // Must overshoot the lowered and lower-both caps
                            // and the baseline/lower-both impact tolerances.
                            const double thr_lower = *ref + std::min(50.0, 1.5 * *ref);
                            const double thr_both = *ref + std::min(75.0, 2.0 * *ref);
                            if (x < thr_lower + 0.25 || x < thr_both + 0.25) continue;
                            if (x - p_m < tol_base + 0.25 || x - p_m < tol_both + 0.25) continue;
                        } else {  // ImpactMargin
                            const double lo =
                                std::max(thr_base + 0.5, p_m + tol_lower + 0.5);
                            const double hi = p_m + tol_both - 0.5;
                            if (hi <= lo) continue;
                            x = 0.5 * (lo + hi);
                        }
                    }
                    if (x <= u->top_price + 0.01 || x <= u->below_price + 0.01) continue;
                    if (verify_and_apply(*u, x, quota.klass)) {
                        --quota.remaining;
                        if (in_band_edit) used_inband_units.insert(u->unit_id);
                        placed = true;
                        break;
                    }
                }
            }
        }
        (void)placed;
    }

    std::string unfilled;
    auto note = [&](const char* name, int n) {
        if (n > 0) {
            if (!unfilled.empty()) unfilled += ", ";
            unfilled += std::string(name) + ":" + std::to_string(n);
        }
    };
    note("non-pivotal", nonpivotal_remaining);
    note("fail-all", pivotal_quotas[0].remaining);
    note("conduct-margin", pivotal_quotas[1].remaining);
    note("impact-margin", pivotal_quotas[2].remaining);
    if (!unfilled.empty()) {
        fail(Errc::InvalidSpec, "dataset could not host the requested spikes (" + unfilled + ")");
    }
    return {std::move(out), report};
}

Dataset perturb(const Dataset& data, PerturbScenario scenario, const PerturbOptions& options) {
    return perturb_with_report(data, scenario, options).first;
}

}  // namespace ampsim
