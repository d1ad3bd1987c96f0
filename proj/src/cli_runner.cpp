// Command-line surface: argument handling, config/flag merging, CSV emission,
// and the run manifest. Every subcommand is a thin orchestration of the
// library modules; nothing here owns domain logic.
#include "ampsim/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ampsim/amp_screening.hpp"
#include "ampsim/config.hpp"
#include "ampsim/core_data.hpp"
#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/hours.hpp"
#include "ampsim/market_clearing.hpp"
#include "ampsim/parallel.hpp"
#include "ampsim/rdd.hpp"
#include "ampsim/reference_levels.hpp"
#include "ampsim/scenario_engine.hpp"
#include "ampsim/structural_indices.hpp"
#include "ampsim/synthetic_generator.hpp"

namespace ampsim::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kSynopsis =
    "usage: amp-sim <subcommand> [options]\n"
    "  subcommands: refs | rsi | congestion | screen | clear | scenario | synth | rdd |"
    " pipeline\n"
    "  common: --config FILE  --out DIR  --seed N  --threads N\n"
    "  screen/scenario: --preset NAME  --exclude FILE\n"
    "  rdd: --bandwidth H|retain:F  --retain F  --fuzzy SIGMA  --per-bidder\n"
    "  synth: --spec FILE  --perturb calm|spike|withhold\n";

struct Ctx {
    FlatConfig cfg;
    fs::path out_dir;
    int threads = 1;
    std::map<std::string, std::string> input_digests;
    std::vector<std::string> outputs;
};

void note_input(Ctx& c, const fs::path& p) {
    c.input_digests[p.string()] = csv::digest_hex(csv::read_file(p));
}

fs::path out_file(Ctx& c, const std::string& name) {
    c.outputs.push_back(name);
    return c.out_dir / name;
}

void write_manifest(Ctx& c, const std::string& subcommand, std::optional<std::uint64_t> seed) {
    json m;
    m["subcommand"] = subcommand;
    m["tool"] = kToolVersion;
    if (seed) m["seed"] = *seed;
    m["config_digest"] = csv::digest_hex(c.cfg.canonical_text());
    m["inputs"] = json::object();
    for (const auto& [path, digest] : c.input_digests) m["inputs"][path] = digest;
    std::vector<std::string> outs = c.outputs;
    std::sort(outs.begin(), outs.end());
    outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
    m["outputs"] = outs;
    csv::write_file(c.out_dir / "manifest.json", m.dump(2) + "\n");
}

// --- small enum parsers -----------------------------------------------------

[[noreturn]] void bad_choice(const std::string& key, const std::string& v, const char* wanted) {
    fail(Errc::UsageError, "config key '" + key + "': expected " + wanted + ", got '" + v + "'");
}

MustTakeRule parse_must_take(const std::string& v) {
    if (v == "max_output") return MustTakeRule::MaxOutput;
    if (v == "segment_sum") return MustTakeRule::SegmentSum;
    bad_choice("must_take", v, "max_output|segment_sum");
}

DemandField parse_demand(const std::string& v) {
    if (v == "load_forecast") return DemandField::LoadForecast;
    if (v == "load_plus_reserves") return DemandField::LoadPlusReserves;
    bad_choice("demand_field", v, "load_forecast|load_plus_reserves");
}

ScoreKind parse_score_kind(const std::string& v) {
    if (v == "rsi") return ScoreKind::Rsi;
    if (v == "congestion") return ScoreKind::Congestion;
    bad_choice("structural_kind", v, "rsi|congestion");
}

TreatedSide parse_side(const std::string& v) {
    if (v == "leq") return TreatedSide::Leq;
    if (v == "geq") return TreatedSide::Geq;
    bad_choice("treated_side", v, "leq|geq");
}

ImpactBase parse_impact_base(const std::string& v) {
    if (v == "mitigated") return ImpactBase::Mitigated;
    if (v == "unmitigated") return ImpactBase::Unmitigated;
    bad_choice("impact_base", v, "mitigated|unmitigated");
}

HourId parse_hour_or_index(const std::string& key, const std::string& v) {
    if (v.find('T') != std::string::npos) return parse_hour(v);
    try {
        return static_cast<HourId>(std::stoll(v));
    } catch (const std::exception&) {
        bad_choice(key, v, "an hour id or YYYY-MM-DDTHH:00Z");
    }
}

// --- shared loading ----------------------------------------------------------

EconomicBand band_from(const FlatConfig& cfg) {
    return {cfg.get_double("ref_band_low", EconomicBand{}.low),
            cfg.get_double("ref_band_high", EconomicBand{}.high)};
}

Dataset load_dataset(Ctx& c, bool require_areas) {
    const fs::path offers_path = c.cfg.require_string("offers");
    const fs::path market_path = c.cfg.require_string("market");
    note_input(c, offers_path);
    note_input(c, market_path);
    const int cap = c.cfg.get_int("segment_cap", kSegmentCapTwelveStep);
    auto offers = load_offers_csv(offers_path, cap);
    auto market = load_market_csv(market_path);
    std::map<HourId, std::vector<AreaRecord>> areas;
    const bool have_areas = c.cfg.has("areas");
    if (have_areas) {
        const fs::path areas_path = c.cfg.require_string("areas");
        note_input(c, areas_path);
        areas = load_areas_csv(areas_path);
    } else if (require_areas) {
        fail(Errc::UsageError, "congestion scoring requires an areas file (config key 'areas')");
    }
    return assemble_dataset(std::move(offers), std::move(market), cap,
                            have_areas ? &areas : nullptr);
}

std::set<HourId> load_excluded_hours(Ctx& c) {
    if (!c.cfg.has("exclude_hours")) return {};
    const fs::path path = c.cfg.require_string("exclude_hours");
    note_input(c, path);
    std::set<HourId> out;
    for (const auto& row : csv::read_rows(path, {"hour"})) {
        out.insert(parse_hour(row.fields[0]));
    }
    return out;
}

AmpConfig amp_config_from(const FlatConfig& cfg) {
    AmpConfig c = cfg.has("preset") ? preset_config(cfg.require_string("preset")) : AmpConfig{};
    if (cfg.has("structural_kind")) {
        c.structural.kind = parse_score_kind(cfg.require_string("structural_kind"));
        if (c.structural.kind == ScoreKind::Congestion) {
            c.structural.cutoff = 0.04;
            c.structural.treated_side = TreatedSide::Geq;
        }
    }
    c.structural.cutoff = cfg.get_double("structural_cutoff", c.structural.cutoff);
    if (cfg.has("treated_side")) {
        c.structural.treated_side = parse_side(cfg.require_string("treated_side"));
    }
    c.structural.enabled = cfg.get_bool("structural_enabled", c.structural.enabled);
    c.conduct_abs = cfg.get_double("conduct_abs", c.conduct_abs);
    c.conduct_pct = cfg.get_double("conduct_pct", c.conduct_pct);
    c.impact_abs = cfg.get_double("impact_abs", c.impact_abs);
    c.impact_pct = cfg.get_double("impact_pct", c.impact_pct);
    if (cfg.has("impact_base")) {
        c.impact_base = parse_impact_base(cfg.require_string("impact_base"));
    }
    if (cfg.get_string("conduct_rule", "isone") == "nyiso") {
        c.conduct_rule = ConductRule::Nyiso;
        NyisoAreaRule rule;
        rule.pct = cfg.get_double("nyiso_pct", rule.pct);
        rule.hours_per_year = cfg.get_double("nyiso_hours_per_year", rule.hours_per_year);
        rule.avg_price = cfg.get_double("nyiso_avg_price", rule.avg_price);
        rule.constrained_hours = cfg.get_double("nyiso_constrained_hours", rule.constrained_hours);
        if (cfg.has("nyiso_unit_threshold")) {
            rule.unit_threshold = cfg.get_double("nyiso_unit_threshold", 0.0);
        }
        c.nyiso_area_rule = rule;
    }
    return c;
}

ScenarioOptions scenario_options_from(const Ctx& c) {
    ScenarioOptions o;
    o.demand = parse_demand(c.cfg.get_string("demand_field", "load_forecast"));
    o.must_take = parse_must_take(c.cfg.get_string("must_take", "max_output"));
    o.ref_window_days = c.cfg.get_int("ref_window_days", kDefaultRefWindowDays);
    o.ref_band = band_from(c.cfg);
    o.threads = c.threads;
    return o;
}

// Scores for the configured structural kind, keyed per hour.
struct ScoreTable {
    ScoreKind kind = ScoreKind::Rsi;
    std::map<HourId, std::map<std::string, double>> by_bidder;  // rsi
    std::map<HourId, double> market_level;                      // congestion

    HourScores at(HourId hour) const {
        HourScores s;
        if (kind == ScoreKind::Rsi) {
            const auto it = by_bidder.find(hour);
            if (it != by_bidder.end()) s.by_bidder = it->second;
        } else {
            const auto it = market_level.find(hour);
            if (it != market_level.end()) s.market_level = it->second;
        }
        return s;
    }
};

ScoreTable score_table(const Dataset& data, ScoreKind kind, MustTakeRule rule) {
    ScoreTable t;
    t.kind = kind;
    if (kind == ScoreKind::Rsi) {
        for (const auto& e : market_rsi_series(data, rule).entries) {
            t.by_bidder[e.hour][e.bidder_id] = e.value;
        }
    } else {
        for (const auto& e : congestion_series(data).entries) {
            t.market_level[e.hour] = e.value;
        }
    }
    return t;
}

// --- panel construction ------------------------------------------------------

std::vector<rdd::ObservationRow> panel_from_dataset(const Ctx& c, const Dataset& data,
                                                    ScoreKind kind) {
    const int window = c.cfg.get_int("ref_window_days", kDefaultRefWindowDays);
    const ReferenceLevels refs = compute_reference_levels(data, window, band_from(c.cfg),
                                                          c.threads);
    const MustTakeRule rule = parse_must_take(c.cfg.get_string("must_take", "max_output"));
    const ScoreTable scores = score_table(data, kind, rule);
    const double default_cutoff = kind == ScoreKind::Rsi ? 1.0 : 0.04;
    const TreatedSide default_side = kind == ScoreKind::Rsi ? TreatedSide::Leq
                                                            : TreatedSide::Geq;
    const double cutoff = c.cfg.get_double("structural_cutoff", default_cutoff);
    const TreatedSide side = c.cfg.has("treated_side")
                                 ? parse_side(c.cfg.require_string("treated_side"))
                                 : default_side;

    std::vector<rdd::ObservationRow> rows;
    for (const auto& m : data.market) {
        const auto offers = data.offers_at(m.hour);
        std::size_t i = 0;
        while (i < offers.size()) {
            std::size_t j = i;
            while (j < offers.size() && offers[j].unit_id == offers[i].unit_id) ++j;
            const auto unit = offers.subspan(i, j - i);
            i = j;
            const auto p_max = max_economic_bid(unit);
            if (!p_max) continue;
            const auto ref = refs.at(unit.front().unit_id, m.hour);
            if (!ref) continue;
            std::optional<double> score;
            if (kind == ScoreKind::Rsi) {
                const auto hit = scores.by_bidder.find(m.hour);
                if (hit != scores.by_bidder.end()) {
                    const auto bit = hit->second.find(unit.front().bidder_id);
                    if (bit != hit->second.end()) score = bit->second;
                }
            } else {
                const auto hit = scores.market_level.find(m.hour);
                if (hit != scores.market_level.end()) score = hit->second;
            }
            if (!score) continue;
            const auto [centered, treated] = rdd::center_score(*score, cutoff, side);
            rdd::ObservationRow row;
            row.hour = m.hour;
            row.bidder_id = unit.front().bidder_id;
            row.unit_id = unit.front().unit_id;
            row.p_max = *p_max;
            row.score = *score;
            row.centered_score = centered;
            row.treatment = treated;
            row.ref = *ref;
            row.gas = m.gas_price;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// --- subcommand bodies -------------------------------------------------------

// Carries a stage-qualified pipeline failure up to run() with its exit class.
struct StagedFailure {
    Errc code;
    std::string text;
};

void run_refs(Ctx& c) {
    const Dataset data = load_dataset(c, false);
    const ReferenceLevels refs = compute_reference_levels(
        data, c.cfg.get_int("ref_window_days", kDefaultRefWindowDays), band_from(c.cfg),
        c.threads);
    csv::Writer w({"hour", "unit_id", "reference_usd_per_mwh"});
    for (const HourId hour : refs.hours()) {
        for (const auto& unit : refs.units()) {
            const auto v = refs.at(unit, hour);
            w.add_row({format_hour(hour), unit, v ? csv::format_double(*v) : ""});
        }
    }
    w.save(out_file(c, "refs.csv"));
    write_manifest(c, "refs", std::nullopt);
}

void run_scores(Ctx& c, ScoreKind kind) {
    const Dataset data = load_dataset(c, kind == ScoreKind::Congestion);
    const ScoreSeries series =
        kind == ScoreKind::Rsi
            ? market_rsi_series(data,
                                parse_must_take(c.cfg.get_string("must_take", "max_output")))
            : congestion_series(data);
    csv::Writer w({"hour", "bidder_id", "score"});
    for (const auto& e : series.entries) {
        w.add_row({format_hour(e.hour), e.bidder_id, csv::format_double(e.value)});
    }
    w.save(out_file(c, "scores.csv"));
    write_manifest(c, kind == ScoreKind::Rsi ? "rsi" : "congestion", std::nullopt);
}

void run_clear(Ctx& c) {
    const Dataset data = load_dataset(c, false);
    csv::Writer w({"hour", "clearing_price", "total_cost", "feasible"});
    for (const auto& m : data.market) {
        const auto stack = build_stack(data.offers_at(m.hour));
        ClearingResult r;
        if (stack.empty()) {
            r.feasible = false;
        } else {
            r = try_clear(stack, m.load_forecast);
        }
        w.add_row({format_hour(m.hour), csv::format_double(r.clearing_price),
                   csv::format_double(r.total_cost), r.feasible ? "true" : "false"});
    }
    w.save(out_file(c, "prices.csv"));
    write_manifest(c, "clear", std::nullopt);
}

void run_screen(Ctx& c) {
    const AmpConfig amp = amp_config_from(c.cfg);
    const Dataset data = load_dataset(c, amp.structural.kind == ScoreKind::Congestion);
    const ScenarioOptions opts = scenario_options_from(c);
    const ReferenceLevels refs =
        compute_reference_levels(data, opts.ref_window_days, opts.ref_band, c.threads);
    const ScoreTable scores = score_table(data, amp.structural.kind, opts.must_take);
    const ClearingFn clearing = [](std::span<const StackSegment> stack, double load) {
        return clear(stack, load);
    };

    std::vector<ScreeningOutcome> outcomes(data.market.size());
    detail::parallel_chunks(data.market.size(), c.threads,
                            [&](std::size_t begin, std::size_t end) {
                                for (std::size_t i = begin; i < end; ++i) {
                                    const auto& m = data.market[i];
                                    outcomes[i] = screen_hour(data.offers_at(m.hour),
                                                              refs.row_at(m.hour),
                                                              scores.at(m.hour),
                                                              m.load_forecast, clearing, amp);
                                }
                            });

    csv::Writer w({"hour", "structural_failed", "n_conduct_failures", "impact_failed",
                   "mitigated", "original_price", "mitigated_price"});
    for (const auto& o : outcomes) {
        w.add_row({format_hour(o.hour), o.structural_failed ? "true" : "false",
                   std::to_string(o.conduct_failures.size()), o.impact_failed ? "true" : "false",
                   o.mitigated ? "true" : "false", csv::format_double(o.original_price),
                   csv::format_double(o.mitigated_price)});
    }
    w.save(out_file(c, "screening.csv"));
    write_manifest(c, "screen", std::nullopt);
}

void write_scenario_rows(Ctx& c, std::span<const ScenarioReport> reports) {
    csv::Writer w({"scenario", "mitigated_hours", "included_hours", "excluded_hours",
                   "avg_clearing_price", "avg_price_decrease", "total_surplus_increase",
                   "per_hour_surplus"});
    for (const auto& r : reports) {
        w.add_row({r.name, std::to_string(r.mitigated_hours.size()),
                   std::to_string(r.included_hours), std::to_string(r.excluded_hours),
                   csv::format_double(r.avg_clearing_price),
                   r.avg_price_decrease ? csv::format_double(*r.avg_price_decrease) : "",
                   csv::format_double(r.total_surplus_increase),
                   csv::format_double(r.per_hour_surplus)});
    }
    w.save(out_file(c, "scenario_report.csv"));
}

void write_hours_detail(Ctx& c, const ScenarioReport& report, const std::string& file_name) {
    csv::Writer w({"hour", "p_star", "p_mitigated", "mitigated_flag"});
    for (const auto& h : report.hours) {
        w.add_row({format_hour(h.hour), csv::format_double(h.p_star),
                   csv::format_double(h.p_mitigated), h.mitigated ? "true" : "false"});
    }
    w.save(out_file(c, file_name));
}

void run_scenario_cmd(Ctx& c) {
    const AmpConfig amp = amp_config_from(c.cfg);
    const Dataset data = load_dataset(c, amp.structural.kind == ScoreKind::Congestion);
    const std::set<HourId> excluded = load_excluded_hours(c);
    const std::string name = c.cfg.get_string("preset", "custom");
    const ScenarioReport report =
        run_scenario(data, amp, excluded, name, scenario_options_from(c));
    write_scenario_rows(c, {&report, 1});
    write_hours_detail(c, report, "hours.csv");
    write_manifest(c, "scenario", std::nullopt);
}

SynthSpec synth_spec_from(const FlatConfig& cfg) {
    SynthSpec s;
    s.n_bidders = cfg.get_int("n_bidders", s.n_bidders);
    s.units_per_bidder = cfg.get_int("units_per_bidder", s.units_per_bidder);
    s.n_hours = cfg.get_int("n_hours", s.n_hours);
    if (cfg.has("start_hour")) {
        s.start_hour = parse_hour_or_index("start_hour", cfg.require_string("start_hour"));
    }
    s.score.cutoff = cfg.get_double("score_cutoff", s.score.cutoff);
    if (cfg.has("score_treated_side")) {
        s.score.treated_side = parse_side(cfg.require_string("score_treated_side"));
    }
    s.score.near_mass = cfg.get_double("score_near_mass", s.score.near_mass);
    s.score.near_halfwidth = cfg.get_double("score_near_halfwidth", s.score.near_halfwidth);
    s.score.tail_offset = cfg.get_double("score_tail_offset", s.score.tail_offset);
    s.score.tail_mean = cfg.get_double("score_tail_mean", s.score.tail_mean);
    s.score.treated_tail_mass =
        cfg.get_double("score_treated_tail_mass", s.score.treated_tail_mass);
    s.tau = cfg.get_double("tau", s.tau);
    s.beta0_low = cfg.get_double("beta0_low", s.beta0_low);
    s.beta0_high = cfg.get_double("beta0_high", s.beta0_high);
    s.beta2 = cfg.get_double("beta2", s.beta2);
    s.beta3 = cfg.get_double("beta3", s.beta3);
    s.beta4 = cfg.get_double("beta4", s.beta4);
    s.beta5 = cfg.get_double("beta5", s.beta5);
    s.sigma_eps = cfg.get_double("sigma_eps", s.sigma_eps);
    s.sigma_bidder = cfg.get_double("sigma_bidder", s.sigma_bidder);
    s.ref_process.mean = cfg.get_double("ref_mean", s.ref_process.mean);
    s.ref_process.phi = cfg.get_double("ref_phi", s.ref_process.phi);
    s.ref_process.sigma = cfg.get_double("ref_sigma", s.ref_process.sigma);
    s.ref_process.floor = cfg.get_double("ref_floor", s.ref_process.floor);
    s.ref_mean_spread = cfg.get_double("ref_mean_spread", s.ref_mean_spread);
    s.cheap_unit_share = cfg.get_double("cheap_unit_share", s.cheap_unit_share);
    s.cheap_ref_mean = cfg.get_double("cheap_ref_mean", s.cheap_ref_mean);
    s.gas_process.mean = cfg.get_double("gas_mean", s.gas_process.mean);
    s.gas_process.phi = cfg.get_double("gas_phi", s.gas_process.phi);
    s.gas_process.sigma = cfg.get_double("gas_sigma", s.gas_process.sigma);
    s.gas_process.floor = cfg.get_double("gas_floor", s.gas_process.floor);
    s.max_segments = cfg.get_int("max_segments", s.max_segments);
    s.capacity_low = cfg.get_double("capacity_low", s.capacity_low);
    s.capacity_high = cfg.get_double("capacity_high", s.capacity_high);
    s.segment_gap_low = cfg.get_double("segment_gap_low", s.segment_gap_low);
    s.segment_gap_high = cfg.get_double("segment_gap_high", s.segment_gap_high);
    s.util_normal_low = cfg.get_double("util_normal_low", s.util_normal_low);
    s.util_normal_high = cfg.get_double("util_normal_high", s.util_normal_high);
    s.util_tight_low = cfg.get_double("util_tight_low", s.util_tight_low);
    s.util_tight_high = cfg.get_double("util_tight_high", s.util_tight_high);
    s.tight_full_share = cfg.get_double("tight_full_share", s.tight_full_share);
    s.tight_partial_share = cfg.get_double("tight_partial_share", s.tight_partial_share);
    s.partial_offer_fraction =
        cfg.get_double("partial_offer_fraction", s.partial_offer_fraction);
    s.reserve_fraction = cfg.get_double("reserve_fraction", s.reserve_fraction);
    s.congestion_event_prob =
        cfg.get_double("congestion_event_prob", s.congestion_event_prob);
    s.congestion_shadow_mean =
        cfg.get_double("congestion_shadow_mean", s.congestion_shadow_mean);
    s.seed = cfg.get_u64("seed", s.seed);
    return s;
}

PerturbOptions perturb_options_from(const FlatConfig& cfg) {
    PerturbOptions o;
    o.warmup_days = cfg.get_int("warmup_days", o.warmup_days);
    o.spike_price = cfg.get_double("spike_price", o.spike_price);
    o.n_fail_all = cfg.get_int("n_fail_all", o.n_fail_all);
    o.n_conduct_margin = cfg.get_int("n_conduct_margin", o.n_conduct_margin);
    o.n_impact_margin = cfg.get_int("n_impact_margin", o.n_impact_margin);
    o.n_nonpivotal = cfg.get_int("n_nonpivotal", o.n_nonpivotal);
    o.n_withhold = cfg.get_int("n_withhold", o.n_withhold);
    return o;
}

PerturbScenario parse_perturb(const std::string& v) {
    if (v == "calm") return PerturbScenario::Calm;
    if (v == "spike") return PerturbScenario::Spike;
    if (v == "withhold") return PerturbScenario::Withhold;
    bad_choice("perturb", v, "calm|spike|withhold");
}

// Generates (and optionally perturbs) a dataset into the out directory.
// Returns the spec actually used so callers can reuse the seed.
SynthSpec run_synth_stage(Ctx& c) {
    const SynthSpec spec = synth_spec_from(c.cfg);
    auto [data, truth] = generate(spec);
    const PerturbScenario scenario = parse_perturb(c.cfg.get_string("perturb", "calm"));
    if (scenario != PerturbScenario::Calm) {
        data = perturb(data, scenario, perturb_options_from(c.cfg));
    }
    write_offers_csv(out_file(c, "offers.csv"), data.offers);
    write_market_csv(out_file(c, "market.csv"), data.market);
    write_areas_csv(out_file(c, "areas.csv"), data.market);
    write_truth_csv(out_file(c, "truth.csv"), truth);
    if (c.cfg.get_bool("write_panel", true)) {
        // The generator's own covariate record (DGP scores and references);
        // feeding it to `rdd` recovers tau without the rolling-window noise.
        rdd::write_panel_csv(out_file(c, "panel.csv"), truth.panel);
    }
    return spec;
}

void run_synth(Ctx& c) {
    const SynthSpec spec = run_synth_stage(c);
    write_manifest(c, "synth", spec.seed);
}

rdd::RddSpec rdd_spec_from(const Ctx& c, std::span<const rdd::ObservationRow> rows) {
    rdd::RddSpec spec;
    if (c.cfg.has("retain")) {
        std::vector<double> centered;
        centered.reserve(rows.size());
        for (const auto& r : rows) centered.push_back(r.centered_score);
        spec.bandwidth = rdd::select_bandwidth(centered, c.cfg.get_double("retain", 0.0));
    } else if (c.cfg.has("bandwidth")) {
        const std::string v = c.cfg.require_string("bandwidth");
        if (v.rfind("retain:", 0) == 0) {
            FlatConfig one;
            one.set("retain", v.substr(7));
            std::vector<double> centered;
            centered.reserve(rows.size());
            for (const auto& r : rows) centered.push_back(r.centered_score);
            spec.bandwidth = rdd::select_bandwidth(centered, one.get_double("retain", 0.0));
        } else if (v == "inf") {
            spec.bandwidth = std::numeric_limits<double>::infinity();
        } else {
            spec.bandwidth = c.cfg.get_double("bandwidth", spec.bandwidth);
        }
    }
    if (c.cfg.has("fuzzy")) spec.fuzzy_sigma = c.cfg.get_double("fuzzy", 0.0);
    if (c.cfg.has("fuzzy_interaction")) {
        const std::string v = c.cfg.require_string("fuzzy_interaction");
        if (v == "p") {
            spec.fuzzy_interaction_uses_p = true;
        } else if (v == "sharp") {
            spec.fuzzy_interaction_uses_p = false;
        } else {
            bad_choice("fuzzy_interaction", v, "p|sharp");
        }
    }
    spec.poly_order = c.cfg.get_int("poly_order", spec.poly_order);
    spec.fixed_effects = c.cfg.get_bool("fixed_effects", spec.fixed_effects);
    spec.cluster_by_bidder = c.cfg.get_bool("cluster", spec.cluster_by_bidder);
    spec.alpha = c.cfg.get_double("alpha", spec.alpha);
    return spec;
}

void write_fit_csv(Ctx& c, const rdd::RddFit& fit) {
    csv::Writer w({"coefficient", "estimate", "se", "t", "p"});
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        w.add_row({fit.names[i], csv::format_double(fit.beta[i]), csv::format_double(fit.se[i]),
                   csv::format_double(fit.t_stat[i]), csv::format_double(fit.p_value[i])});
    }
    w.save(out_file(c, "fit.csv"));
}

void write_summary_csv(Ctx& c, const rdd::PerBidderResult& result) {
    const auto& s = result.summary;
    csv::Writer w({"analyzed", "excluded", "significant", "significant_share", "median_effect",
                   "iqr_low", "iqr_high", "median_effect_significant", "iqr_low_significant",
                   "iqr_high_significant"});
    auto opt = [](const std::optional<double>& v) {
        return v ? csv::format_double(*v) : std::string();
    };
    w.add_row({std::to_string(s.analyzed), std::to_string(s.excluded),
               std::to_string(s.significant), csv::format_double(s.significant_share),
               csv::format_double(s.median_effect), csv::format_double(s.iqr_low),
               csv::format_double(s.iqr_high), opt(s.median_effect_significant),
               opt(s.iqr_low_significant), opt(s.iqr_high_significant)});
    w.save(out_file(c, "summary.csv"));
}

std::vector<rdd::ObservationRow> load_panel_rows(Ctx& c) {
    if (c.cfg.has("panel")) {
        const fs::path path = c.cfg.require_string("panel");
        note_input(c, path);
        return rdd::load_panel_csv(path).rows;
    }
    if (c.cfg.has("offers")) {
        const ScoreKind kind = parse_score_kind(c.cfg.get_string("score", "rsi"));
        const Dataset data = load_dataset(c, kind == ScoreKind::Congestion);
        return panel_from_dataset(c, data, kind);
    }
    fail(Errc::UsageError, "rdd needs a 'panel' CSV or an offers/market dataset");
}

void run_rdd(Ctx& c) {
    const std::vector<rdd::ObservationRow> rows = load_panel_rows(c);
    const rdd::RddSpec spec = rdd_spec_from(c, rows);
    write_fit_csv(c, rdd::fit_pooled(rows, spec));
    if (c.cfg.get_bool("per_bidder", false)) {
        rdd::PerBidderRules rules;
        rules.min_rows = static_cast<std::size_t>(c.cfg.get_int(
            "per_bidder_min_rows", static_cast<int>(rules.min_rows)));
        rules.min_variance = c.cfg.get_double("per_bidder_min_variance", rules.min_variance);
        write_summary_csv(c, rdd::fit_per_bidder(rows, spec, rules, c.threads));
    }
    write_manifest(c, "rdd", std::nullopt);
}

void run_pipeline(Ctx& c) {
    std::string stage = "pipeline";
    try {
        std::optional<std::uint64_t> seed;
        if (c.cfg.get_bool("synth", false)) {
            stage = "synth";
            seed = synth_spec_from(c.cfg).seed;
            if (!c.cfg.has("write_panel")) c.cfg.set("write_panel", "false");
            run_synth_stage(c);
            c.cfg.set("offers", (c.out_dir / "offers.csv").string());
            c.cfg.set("market", (c.out_dir / "market.csv").string());
            c.cfg.set("areas", (c.out_dir / "areas.csv").string());
        }

        stage = "ingest";
        const ScoreKind kind = parse_score_kind(c.cfg.get_string("score", "rsi"));
        const Dataset data = load_dataset(c, kind == ScoreKind::Congestion);
        const ScenarioOptions opts = scenario_options_from(c);

        stage = "refs";
        const ReferenceLevels refs =
            compute_reference_levels(data, opts.ref_window_days, opts.ref_band, c.threads);
        {
            csv::Writer w({"hour", "unit_id", "reference_usd_per_mwh"});
            for (const HourId hour : refs.hours()) {
                for (const auto& unit : refs.units()) {
                    const auto v = refs.at(unit, hour);
                    w.add_row({format_hour(hour), unit, v ? csv::format_double(*v) : ""});
                }
            }
            w.save(out_file(c, "refs.csv"));
        }

        stage = kind == ScoreKind::Rsi ? "rsi" : "congestion";
        const ScoreTable scores = score_table(data, kind, opts.must_take);
        {
            const ScoreSeries series =
                kind == ScoreKind::Rsi ? market_rsi_series(data, opts.must_take)
                                       : congestion_series(data);
            csv::Writer w({"hour", "bidder_id", "score"});
            for (const auto& e : series.entries) {
                w.add_row({format_hour(e.hour), e.bidder_id, csv::format_double(e.value)});
            }
            w.save(out_file(c, "scores.csv"));
        }

        stage = "clear";
        {
            csv::Writer w({"hour", "clearing_price", "total_cost", "feasible"});
            for (const auto& m : data.market) {
                const auto stack = build_stack(data.offers_at(m.hour));
                ClearingResult r;
                if (stack.empty()) {
                    r.feasible = false;
                } else {
                    r = try_clear(stack, m.load_forecast);
                }
                w.add_row({format_hour(m.hour), csv::format_double(r.clearing_price),
                           csv::format_double(r.total_cost), r.feasible ? "true" : "false"});
            }
            w.save(out_file(c, "prices.csv"));
        }

        stage = "screen";
        const AmpConfig amp = amp_config_from(c.cfg);
        {
            const ClearingFn clearing = [](std::span<const StackSegment> stack, double load) {
                return clear(stack, load);
            };
            std::vector<ScreeningOutcome> outcomes(data.market.size());
            detail::parallel_chunks(
                data.market.size(), c.threads, [&](std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                        const auto& m = data.market[i];
                        outcomes[i] = screen_hour(data.offers_at(m.hour), refs.row_at(m.hour),
                                                  scores.at(m.hour), m.load_forecast, clearing,
                                                  amp);
                    }
                });
            csv::Writer w({"hour", "structural_failed", "n_conduct_failures", "impact_failed",
                           "mitigated", "original_price", "mitigated_price"});
            for (const auto& o : outcomes) {
                w.add_row({format_hour(o.hour), o.structural_failed ? "true" : "false",
                           std::to_string(o.conduct_failures.size()),
                           o.impact_failed ? "true" : "false", o.mitigated ? "true" : "false",
                           csv::format_double(o.original_price),
                           csv::format_double(o.mitigated_price)});
            }
            w.save(out_file(c, "screening.csv"));
        }

        stage = "scenario";
        {
            const std::set<HourId> excluded = load_excluded_hours(c);
            std::vector<std::string> names;
            std::string list = c.cfg.get_string("scenarios", "baseline");
            while (!list.empty()) {
                const std::size_t comma = list.find(',');
                names.push_back(list.substr(0, comma));
                list = comma == std::string::npos ? std::string() : list.substr(comma + 1);
            }
            std::vector<ScenarioReport> reports;
            for (const auto& name : names) {
                reports.push_back(
                    run_scenario(data, preset_config(name), excluded, name, opts));
                write_hours_detail(c, reports.back(), "hours_" + name + ".csv");
            }
            write_scenario_rows(c, reports);
        }

        std::optional<std::uint64_t> manifest_seed = seed;
        if (c.cfg.get_bool("rdd", false)) {
            stage = "panel";
            const std::vector<rdd::ObservationRow> rows = panel_from_dataset(c, data, kind);
            rdd::write_panel_csv(out_file(c, "panel.csv"), rows);
            stage = "rdd";
            const rdd::RddSpec spec = rdd_spec_from(c, rows);
            write_fit_csv(c, rdd::fit_pooled(rows, spec));
            if (c.cfg.get_bool("per_bidder", false)) {
                write_summary_csv(c, rdd::fit_per_bidder(rows, spec, {}, c.threads));
            }
        }

        stage = "manifest";
        write_manifest(c, "pipeline", manifest_seed);
    } catch (const AmpError& e) {
        throw StagedFailure{e.code(), "[" + stage + "] " + e.what()};
    }
}

// --- entry -------------------------------------------------------------------

int dispatch(const std::string& subcommand, Ctx& c) {
    if (subcommand == "refs") {
        run_refs(c);
    } else if (subcommand == "rsi") {
        run_scores(c, ScoreKind::Rsi);
    } else if (subcommand == "congestion") {
        run_scores(c, ScoreKind::Congestion);
    } else if (subcommand == "screen") {
        run_screen(c);
    } else if (subcommand == "clear") {
        run_clear(c);
    } else if (subcommand == "scenario") {
        run_scenario_cmd(c);
    } else if (subcommand == "synth") {
        run_synth(c);
    } else if (subcommand == "rdd") {
        run_rdd(c);
    } else if (subcommand == "pipeline") {
        run_pipeline(c);
    } else {
        fail(Errc::UsageError, "unknown subcommand '" + subcommand + "'");
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"amp-sim: bid screening, market clearing, and estimation toolkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    struct FlagValues {
        std::string config, spec, out_dir, exclude, preset, perturb, bandwidth, panel;
        std::uint64_t seed = 0;
        int threads = 0;
        double retain = 0.0, fuzzy = 0.0;
        bool per_bidder = false;
    } fv;

    const std::vector<std::pair<std::string, std::string>> names = {
        {"refs", "roll reference levels from accepted-offer history"},
        {"rsi", "per-bidder residual supply indices"},
        {"congestion", "lagged load-weighted congestion scores"},
        {"screen", "three-test screening verdicts per hour"},
        {"clear", "uniform-price clearing of each hour's stack"},
        {"scenario", "counterfactual run: prices, mitigation, surplus"},
        {"synth", "generate a synthetic market from a spec file"},
        {"rdd", "regression-discontinuity fit on a bid panel"},
        {"pipeline", "ingest -> screen -> scenarios -> panel -> fit"},
    };
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, CLI::Option*> opts;
    for (const auto& [name, blurb] : names) {
        CLI::App* sub = app.add_subcommand(name, blurb);
        sub->allow_extras(false);
        opts[name + ".config"] = sub->add_option("--config", fv.config, "flat key=value file");
        opts[name + ".out"] = sub->add_option("--out", fv.out_dir, "output directory");
        opts[name + ".seed"] = sub->add_option("--seed", fv.seed, "RNG seed");
        opts[name + ".threads"] = sub->add_option("--threads", fv.threads, "worker threads");
        subs[name] = sub;
    }
    opts["synth.spec"] = subs["synth"]->add_option("--spec", fv.spec, "synth spec file");
    opts["synth.perturb"] =
        subs["synth"]->add_option("--perturb", fv.perturb, "calm|spike|withhold");
    for (const char* name : {"screen", "scenario", "pipeline"}) {
        opts[std::string(name) + ".preset"] =
            subs[name]->add_option("--preset", fv.preset, "threshold preset");
        opts[std::string(name) + ".exclude"] =
            subs[name]->add_option("--exclude", fv.exclude, "excluded-hours CSV");
    }
    opts["rdd.bandwidth"] =
        subs["rdd"]->add_option("--bandwidth", fv.bandwidth, "bandwidth (number or retain:F)");
    opts["rdd.retain"] = subs["rdd"]->add_option("--retain", fv.retain, "retained |S~| quantile");
    opts["rdd.fuzzy"] = subs["rdd"]->add_option("--fuzzy", fv.fuzzy, "fuzzy sigma");
    opts["rdd.per_bidder"] =
        subs["rdd"]->add_flag("--per-bidder", fv.per_bidder, "also fit each bidder");
    opts["rdd.panel"] = subs["rdd"]->add_option("--panel", fv.panel, "panel CSV path");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("amp-sim");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help() << "\n";
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "amp-sim: " << e.what() << "\n" << kSynopsis;
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();

    try {
        Ctx c;
        auto given = [&](const std::string& key) {
            const auto it = opts.find(name + "." + key);
            return it != opts.end() && it->second->count() > 0;
        };
        if (given("spec")) {
            c.cfg = FlatConfig::load(fv.spec);
        } else if (given("config")) {
            c.cfg = FlatConfig::load(fv.config);
        }
        if (given("out")) c.cfg.set("out", fv.out_dir);
        if (given("seed")) c.cfg.set("seed", std::to_string(fv.seed));
        if (given("threads")) c.cfg.set("threads", std::to_string(fv.threads));
        if (given("preset")) c.cfg.set("preset", fv.preset);
        if (given("exclude")) c.cfg.set("exclude_hours", fv.exclude);
        if (given("perturb")) c.cfg.set("perturb", fv.perturb);
        if (given("bandwidth")) c.cfg.set("bandwidth", fv.bandwidth);
        if (given("retain")) c.cfg.set("retain", csv::format_double(fv.retain));
        if (given("fuzzy")) c.cfg.set("fuzzy", csv::format_double(fv.fuzzy));
        if (given("per_bidder") && fv.per_bidder) c.cfg.set("per_bidder", "true");
        if (given("panel")) c.cfg.set("panel", fv.panel);

        if (!c.cfg.has("threads")) {
            if (const char* env = std::getenv("AMP_SIM_THREADS")) c.cfg.set("threads", env);
        }
        c.threads = std::max(1, c.cfg.get_int("threads", 1));
        c.out_dir = c.cfg.get_string("out", ".");
        std::error_code ec;
        fs::create_directories(c.out_dir, ec);

        return dispatch(name, c);
    } catch (const StagedFailure& s) {
        err << "amp-sim: " << s.text << "\n";
        return s.code == Errc::UsageError ? 2 : 1;
    } catch (const AmpError& e) {
        if (e.code() == Errc::UsageError) {
            err << "amp-sim: " << e.what() << "\n" << kSynopsis;
            return 2;
        }
        err << "amp-sim: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "amp-sim: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ampsim::cli
