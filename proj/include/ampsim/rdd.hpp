#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ampsim/hours.hpp"
#include "ampsim/structural_indices.hpp"

namespace ampsim::rdd {

// One estimation-panel row: a bidder-unit-hour with its running score and
// controls. `treatment` is 0/1 for sharp designs; fuzzy fits replace it with
// a probability computed from the centered score.
struct ObservationRow {
    HourId hour = 0;
    std::string bidder_id;
    std::string unit_id;
    double p_max = 0.0;          // $/MWh, the unit's maximum economic bid
    double score = 0.0;          // raw running variable S
    double centered_score = 0.0; // S~, positive on the treated side
    double treatment = 0.0;      // T in {0,1} (or p in [0,1] if prefilled)
    double ref = 0.0;            // $/MWh reference level control
    double gas = 0.0;            // $/MMBtu fuel price control
};

// Shifted score and treatment indicator. LEQ side: S~ = c - S, T = 1{S <= c};
// GEQ side: S~ = S - c, T = 1{S >= c}. The boundary S = c is treated.
std::pair<double, int> center_score(double score, double cutoff, TreatedSide side);

// Smallest h such that the share of |S~| <= h reaches retain_fraction: the
// ceil(f*n)-th order statistic of |S~|.
double select_bandwidth(std::span<const double> centered_scores, double retain_fraction);

// Phi(S~ / sigma): probability the unit is screened given a noisy score.
double fuzzy_probability(double centered_score, double sigma);

struct RddSpec {
    double bandwidth = std::numeric_limits<double>::infinity();  // |S~| <= h kept
    int poly_order = 1;                    // 1 or 2 (adds S~^2 terms)
    std::optional<double> fuzzy_sigma;     // off by default
    bool fuzzy_interaction_uses_p = true;  // p (default) vs sharp T in the interaction
    bool fixed_effects = true;             // per-bidder within transformation
    bool cluster_by_bidder = true;
    double alpha = 0.05;
};

struct RddFit {
    std::vector<std::string> names;  // coefficient order of all vectors below
    std::vector<double> beta;
    std::vector<double> se;
    std::vector<double> t_stat;
    std::vector<double> p_value;
    std::vector<double> cov;  // k x k row-major
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;  // 0 when not clustering
    double dof = 0.0;            // t-distribution dof used for p-values
    double r2 = 0.0;             // on untransformed y, fitted incl. fixed effects
    double within_r2 = 0.0;      // on the demeaned system (= r2 without FE)

    std::size_t index_of(const std::string& name) const;  // throws InvalidSpec
    double treatment_estimate() const { return beta[index_of("treatment")]; }
    double treatment_p() const { return p_value[index_of("treatment")]; }
    // Two-sided (1 - alpha) interval from the fit's own dof.
    std::pair<double, double> confidence_interval(const std::string& name, double alpha) const;
};

// Pooled regression of p_max on treatment, the score polynomial, and the
// ref/gas controls, optionally within-transformed by bidder, with CR1
// cluster-robust (by bidder) or HC1 robust standard errors.
RddFit fit_pooled(std::span<const ObservationRow> rows, const RddSpec& spec);

struct BidderExclusion {
    std::string bidder_id;
    std::string reason;
};

struct PerBidderRules {
    std::size_t min_rows = 100;    // in-bandwidth rows required
    double min_variance = 1e-6;    // of p_max
};

struct PerBidderSummary {
    std::size_t analyzed = 0;
    std::size_t significant = 0;  // treatment p-value <= alpha
    double significant_share = 0.0;
    std::size_t excluded = 0;
    double median_effect = 0.0;  // over analyzed bidders
    double iqr_low = 0.0;
    double iqr_high = 0.0;
    std::optional<double> median_effect_significant;
    std::optional<double> iqr_low_significant;
    std::optional<double> iqr_high_significant;
};

struct PerBidderFit {
    std::string bidder_id;
    std::size_t n_rows = 0;
    RddFit fit;
};

struct PerBidderResult {
    std::vector<PerBidderFit> fits;           // analyzed bidders, id-sorted
    std::vector<BidderExclusion> exclusions;  // id-sorted, with reasons
    PerBidderSummary summary;
};

// One regression per bidder (no fixed effects, intercept included, HC1
// standard errors). Bidders failing the rules are listed, not fitted.
PerBidderResult fit_per_bidder(std::span<const ObservationRow> rows, const RddSpec& spec,
                               const PerBidderRules& rules = {}, int threads = 1);

// Panel CSV I/O. Rows with an empty ref or score field are dropped and
// counted rather than invented.
struct PanelData {
    std::vector<ObservationRow> rows;
    std::size_t n_excluded_missing = 0;
};
PanelData load_panel_csv(const std::filesystem::path& path);
void write_panel_csv(const std::filesystem::path& path, std::span<const ObservationRow> rows);

}  // namespace ampsim::rdd
