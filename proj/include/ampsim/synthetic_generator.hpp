#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"
#include "ampsim/rdd.hpp"
#include "ampsim/structural_indices.hpp"

namespace ampsim {

// Mean-reverting AR(1): x_t = mean + phi*(x_{t-1} - mean) + N(0, sigma),
// clamped below at `floor`.
struct Ar1Spec {
    double mean = 40.0;
    double phi = 0.99;
    double sigma = 0.5;
    double floor = 0.0;
};

// Score draw per bidder-hour: a uniform window straddling the cutoff plus an
// exponential tail on the untreated side (and optionally one on the treated
// side, for designs that need mass far from the cutoff on both sides).
struct ScoreMixtureSpec {
    double cutoff = 1.0;
    TreatedSide treated_side = TreatedSide::Leq;
    double near_mass = 0.24;       // P(window); half the window is treated
    double near_halfwidth = 0.2;
    double tail_offset = 0.2;      // gap between cutoff and tail start
    double tail_mean = 0.15;       // exponential scale of the tails
    double treated_tail_mass = 0.0;

    // Probability a draw lands on the treated side, in closed form.
    double analytic_treated_share() const { return 0.5 * near_mass + treated_tail_mass; }
};

// 2019-01-01T00:00Z.
inline constexpr HourId kDefaultStartHour = 429528;

// Full data-generating process. Maximum bids follow
//   p_max = beta0_j + tau_j*T + beta2*S~ + beta3*S~*T + beta4*ref + beta5*gas
//           + b_j + eps
// with per-unit AR(1) reference levels and a market-wide AR(1) gas price.
// The market side (capacities, segment shapes, load, areas) is drawn from an
// independent stream of the same seed, so the regression panel is identical
// whether or not offers are materialized.
struct SynthSpec {
    int n_bidders = 40;
    int units_per_bidder = 1;
    int n_hours = 2000;
    HourId start_hour = kDefaultStartHour;
    ScoreMixtureSpec score{};

    double tau = -5.0;                  // common treatment effect ($/MWh)
    std::vector<double> tau_by_bidder;  // optional per-bidder override

    double beta0_low = 1.0;   // per-bidder intercept beta0_j ~ U(low, high)
    double beta0_high = 4.0;
    double beta2 = 1.5;
    double beta3 = -1.0;
    double beta4 = 0.5;
    double beta5 = 1.0;
    double sigma_eps = 1.2;
    double sigma_bidder = 0.0;  // sd of the bidder random effect b_j

    Ar1Spec ref_process{40.0, 0.99, 0.5, 12.0};
    double ref_mean_spread = 10.0;  // per-unit mean ~ U(mean-spread, mean+spread)
    double cheap_unit_share = 0.15;  // leading units re-centered on a low mean
    double cheap_ref_mean = 15.0;
    Ar1Spec gas_process{3.0, 0.95, 0.05, 0.5};

    // Offer-curve and system shape.
    int max_segments = 10;  // steps per unit-hour drawn in 1..max_segments
    double capacity_low = 150.0;
    double capacity_high = 400.0;
    double segment_gap_low = 0.5;   // price spacing between adjacent steps
    double segment_gap_high = 3.0;
    double util_normal_low = 0.55;   // load as a share of offered supply
    double util_normal_high = 0.90;
    double util_tight_low = 0.996;
    double util_tight_high = 0.999;
    double tight_full_share = 0.06;    // tight hours, full offering (pivotal)
    double tight_partial_share = 0.04; // tight hours, partial offering (non-pivotal)
    double partial_offer_fraction = 0.8;
    double reserve_fraction = 0.02;
    double congestion_event_prob = 0.05;
    double congestion_shadow_mean = 2.0;

    std::uint64_t seed = 1;
};

struct GroundTruth {
    std::vector<std::string> bidder_ids;
    std::vector<double> tau_by_bidder;
    std::vector<double> beta0_by_bidder;
    std::vector<double> bidder_effect;  // realized b_j
    double beta2 = 0.0;
    double beta3 = 0.0;
    double beta4 = 0.0;
    double beta5 = 0.0;

    struct TreatmentRow {
        HourId hour;
        std::string bidder_id;
        double score;
        bool treated;
        double tau;
    };
    std::vector<TreatmentRow> treatment;  // one row per bidder-hour

    // The DGP's own covariate record, one row per unit-hour (ref here is the
    // generating AR(1) value, not a rolling estimate).
    std::vector<rdd::ObservationRow> panel;
};

// Regression panel only (no offers/market/areas): the cheap path for Monte
// Carlo studies. Identical panel to generate() at the same spec and seed.
std::pair<std::vector<rdd::ObservationRow>, GroundTruth> generate_panel(const SynthSpec& spec);

// Full dataset: offers (monotone step curves topped by p_max), market hours
// with load/reserves/gas, and area records with occasional congestion.
std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec);

void write_truth_csv(const std::filesystem::path& path, const GroundTruth& truth);

enum class PerturbScenario { Spike, Withhold, Calm };

// How a SPIKE edit is expected to interact with the threshold presets.
enum class SpikeClass {
    FailAll,        // mitigated under every preset
    ConductMargin,  // mitigated only under lowered conduct thresholds
    ImpactMargin,   // mitigated only under lowered impact thresholds
    NonPivotal,     // mitigated only with the structural test disabled
};

struct PerturbOptions {
    int warmup_days = 90;      // hours before this stay untouched (reference window)
    double spike_price = 900.0;  // far above every threshold, outside the ref band
    int n_fail_all = 2;
    int n_conduct_margin = 8;
    int n_impact_margin = 4;
    int n_nonpivotal = 12;
    int n_withhold = 20;
};

struct PerturbReport {
    struct SpikeEdit {
        HourId hour;
        std::string unit_id;
        double price;
        SpikeClass klass;
    };
    std::vector<SpikeEdit> spikes;
    std::vector<std::pair<HourId, std::string>> withheld;  // (hour, unit)
};

// SPIKE re-prices selected units' top steps into engineered positions
// relative to the preset thresholds (every placement is verified against the
// real screening pipeline before it is kept; throws InvalidSpec when the
// dataset cannot host the requested counts). WITHHOLD flags the largest
// dispensable unit UNAVAILABLE in selected hours. CALM is the identity.
std::pair<Dataset, PerturbReport> perturb_with_report(const Dataset& data,
                                                      PerturbScenario scenario,
                                                      const PerturbOptions& options = {});
Dataset perturb(const Dataset& data, PerturbScenario scenario,
                const PerturbOptions& options = {});

}  // namespace ampsim
