#include "ampsim/rdd.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"
#include "ampsim/parallel.hpp"
#include "ampsim/stats.hpp"

namespace ampsim::rdd {
namespace {

void check_spec(const RddSpec& spec) {
    if (!(spec.bandwidth > 0.0)) fail(Errc::InvalidSpec, "bandwidth must be > 0");
    if (spec.poly_order != 1 && spec.poly_order != 2) {
        fail(Errc::InvalidSpec, "polynomial order must be 1 or 2");
    }
    if (spec.fuzzy_sigma && !(*spec.fuzzy_sigma > 0.0)) {
        fail(Errc::InvalidSpec, "fuzzy sigma must be > 0");
    }
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) fail(Errc::InvalidSpec, "alpha must be in (0,1)");
}

struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> names;
    std::vector<int> cluster;  // group index per row (bidder)
    int n_clusters = 0;
};

Design build_design(std::span<const ObservationRow> rows, const RddSpec& spec,
                    bool with_intercept) {
    std::vector<const ObservationRow*> keep;
    keep.reserve(rows.size());
    for (const auto& r : rows) {
        if (std::abs(r.centered_score) <= spec.bandwidth) keep.push_back(&r);
    }
    if (keep.empty()) fail(Errc::EmptySample, "no rows inside the bandwidth");

    Design d;
    d.names = {"treatment", "centered_score", "centered_score_x_treatment"};
    if (spec.poly_order == 2) {
        d.names.push_back("centered_score_sq");
        d.names.push_back("centered_score_sq_x_treatment");
    }
    d.names.push_back("ref_level");
    d.names.push_back("gas_price");
    if (with_intercept) d.names.push_back("intercept");

    const auto n = static_cast<Eigen::Index>(keep.size());
    const auto k = static_cast<Eigen::Index>(d.names.size());
    d.x.resize(n, k);
    d.y.resize(n);
    d.cluster.resize(keep.size());
    std::map<std::string, int> group_of;
    for (Eigen::Index i = 0; i < n; ++i) {
        const ObservationRow& r = *keep[static_cast<std::size_t>(i)];
        // Fuzzy designs replace the treatment indicator by the screening
        // probability; the interaction follows it unless configured to keep
        // the sharp indicator.
        double t_main = r.treatment;
        double t_inter = r.treatment;
        if (spec.fuzzy_sigma) {
            const double p = fuzzy_probability(r.centered_score, *spec.fuzzy_sigma);
            t_main = p;
            t_inter = spec.fuzzy_interaction_uses_p ? p : r.treatment;
        }
        Eigen::Index c = 0;
        d.x(i, c++) = t_main;
        d.x(i, c++) = r.centered_score;
        d.x(i, c++) = r.centered_score * t_inter;
        if (spec.poly_order == 2) {
            d.x(i, c++) = r.centered_score * r.centered_score;
            d.x(i, c++) = r.centered_score * r.centered_score * t_inter;
        }
        d.x(i, c++) = r.ref;
        d.x(i, c++) = r.gas;
        if (with_intercept) d.x(i, c++) = 1.0;
        d.y(i) = r.p_max;
        auto [it, inserted] = group_of.emplace(r.bidder_id, static_cast<int>(group_of.size()));
        d.cluster[static_cast<std::size_t>(i)] = it->second;
        (void)inserted;
    }
    d.n_clusters = static_cast<int>(group_of.size());
    return d;
}

// Demean y and every column of x within each group (within transformation).
void within_transform(Design& d) {
    const int g = d.n_clusters;
    Eigen::MatrixXd x_mean = Eigen::MatrixXd::Zero(g, d.x.cols());
    Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(g);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(g);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        const int gi = d.cluster[static_cast<std::size_t>(i)];
        x_mean.row(gi) += d.x.row(i);
        y_mean(gi) += d.y(i);
        count(gi) += 1.0;
    }
    for (int gi = 0; gi < g; ++gi) {
        x_mean.row(gi) /= count(gi);
        y_mean(gi) /= count(gi);
    }
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        const int gi = d.cluster[static_cast<std::size_t>(i)];
        d.x.row(i) -= x_mean.row(gi);
        d.y(i) -= y_mean(gi);
    }
}

double centered_tss(const Eigen::VectorXd& y) {
    const double mean = y.mean();
    return (y.array() - mean).matrix().squaredNorm();
}

}  // namespace

std::pair<double, int> center_score(double score, double cutoff, TreatedSide side) {
    if (!std::isfinite(score)) fail(Errc::MalformedRow, "non-finite score");
    const double centered = side == TreatedSide::Leq ? cutoff - score : score - cutoff;
    return {centered, centered >= 0.0 ? 1 : 0};
}

double select_bandwidth(std::span<const double> centered_scores, double retain_fraction) {
    if (centered_scores.empty()) fail(Errc::EmptyInput, "no scores to select a bandwidth from");
    if (!(retain_fraction > 0.0 && retain_fraction <= 1.0)) {
        fail(Errc::InvalidFraction, "retain fraction must be in (0,1]");
    }
    std::vector<double> magnitude;
    magnitude.reserve(centered_scores.size());
    for (double s : centered_scores) magnitude.push_back(std::abs(s));
    std::sort(magnitude.begin(), magnitude.end());
    const double n = static_cast<double>(magnitude.size());
    auto k = static_cast<std::size_t>(std::ceil(retain_fraction * n));
    k = std::max<std::size_t>(k, 1);
    return magnitude[k - 1];
}

double fuzzy_probability(double centered_score, double sigma) {
    if (!(sigma > 0.0)) fail(Errc::InvalidSpec, "fuzzy sigma must be > 0");
    return stats::normal_cdf(centered_score / sigma);
}

std::size_t RddFit::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    fail(Errc::InvalidSpec, "no coefficient named '" + name + "'");
}

std::pair<double, double> RddFit::confidence_interval(const std::string& name,
                                                      double alpha) const {
    const std::size_t i = index_of(name);
    const double width = stats::t_critical(alpha, dof) * se[i];
    return {beta[i] - width, beta[i] + width};
}

RddFit fit_pooled(std::span<const ObservationRow> rows, const RddSpec& spec) {
    check_spec(spec);
    Design d = build_design(rows, spec, /*with_intercept=*/!spec.fixed_effects);
    const Eigen::Index n = d.x.rows();
    const Eigen::Index k = d.x.cols();

    double tss_overall = centered_tss(d.y);
    if (spec.fixed_effects) within_transform(d);
    const double tss_within = spec.fixed_effects ? d.y.squaredNorm() : tss_overall;

    if (spec.cluster_by_bidder && d.n_clusters < 2) {
        fail(Errc::TooFewClusters, "clustered inference needs >= 2 bidders, have " +
                                       std::to_string(d.n_clusters));
    }
    if (n <= k) fail(Errc::EmptySample, "need more rows than coefficients");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
    if (qr.rank() < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::string dropped;
        for (Eigen::Index i = qr.rank(); i < k; ++i) {
            if (!dropped.empty()) dropped += ", ";
            dropped += d.names[static_cast<std::size_t>(perm(i))];
        }
        fail(Errc::RankDeficient, "collinear columns after transformation: " + dropped);
    }
    const Eigen::VectorXd beta = qr.solve(d.y);
    const Eigen::VectorXd resid = d.y - d.x * beta;

    // Sandwich covariance. Bread: (X'X)^-1. Meat: per-cluster score outer
    // products (CR1) or per-row (HC1 when clustering is off).
    const Eigen::MatrixXd xtx = d.x.transpose() * d.x;
    const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    const double n_d = static_cast<double>(n);
    const double k_d = static_cast<double>(k);
    double factor = 0.0;
    double dof = 0.0;
    if (spec.cluster_by_bidder) {
        Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(d.n_clusters, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            scores.row(d.cluster[static_cast<std::size_t>(i)]) += resid(i) * d.x.row(i);
        }
        meat = scores.transpose() * scores;
        const double g = static_cast<double>(d.n_clusters);
        factor = (g / (g - 1.0)) * ((n_d - 1.0) / (n_d - k_d));
        dof = g - 1.0;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            meat += (resid(i) * resid(i)) * (d.x.row(i).transpose() * d.x.row(i));
        }
        factor = n_d / (n_d - k_d);
        dof = n_d - k_d;
    }
    Eigen::MatrixXd cov = factor * bread * meat * bread;
    cov = ((cov + cov.transpose()) * 0.5).eval();

    RddFit fit;
    fit.names = d.names;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.n_clusters = spec.cluster_by_bidder ? static_cast<std::size_t>(d.n_clusters) : 0;
    fit.dof = dof;
    fit.beta.resize(static_cast<std::size_t>(k));
    fit.se.resize(static_cast<std::size_t>(k));
    fit.t_stat.resize(static_cast<std::size_t>(k));
    fit.p_value.resize(static_cast<std::size_t>(k));
    fit.cov.resize(static_cast<std::size_t>(k * k));
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            fit.cov[static_cast<std::size_t>(i * k + j)] = cov(i, j);
        }
        const double b = beta(i);
        const double s = std::sqrt(std::max(0.0, cov(i, i)));
        fit.beta[static_cast<std::size_t>(i)] = b;
        fit.se[static_cast<std::size_t>(i)] = s;
        double t = 0.0;
        double p = 1.0;
        if (s > 0.0) {
            t = b / s;
            p = stats::t_two_sided_p(t, dof);
        } else if (b != 0.0) {
            t = std::numeric_limits<double>::infinity() * (b > 0 ? 1.0 : -1.0);
            p = 0.0;
        }
        fit.t_stat[static_cast<std::size_t>(i)] = t;
        fit.p_value[static_cast<std::size_t>(i)] = p;
    }
    const double ssr = resid.squaredNorm();
    fit.within_r2 = tss_within > 0.0 ? 1.0 - ssr / tss_within : (ssr == 0.0 ? 1.0 : 0.0);
    fit.r2 = tss_overall > 0.0 ? 1.0 - ssr / tss_overall : (ssr == 0.0 ? 1.0 : 0.0);
    return fit;
}

PerBidderResult fit_per_bidder(std::span<const ObservationRow> rows, const RddSpec& spec,
                               const PerBidderRules& rules, int threads) {
    check_spec(spec);
    RddSpec per_spec = spec;
    per_spec.fixed_effects = false;  // intercept per fit instead
    per_spec.cluster_by_bidder = false;

    std::map<std::string, std::vector<ObservationRow>> by_bidder;
    for (const auto& r : rows) by_bidder[r.bidder_id].push_back(r);
    std::vector<const std::pair<const std::string, std::vector<ObservationRow>>*> groups;
    groups.reserve(by_bidder.size());
    for (const auto& g : by_bidder) groups.push_back(&g);

    struct Slot {
        std::optional<PerBidderFit> fit;
        std::optional<BidderExclusion> exclusion;
    };
    std::vector<Slot> slots(groups.size());
    detail::parallel_chunks(groups.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t gi = lo; gi < hi; ++gi) {
            const auto& [bidder, bidder_rows] = *groups[gi];
            std::size_t in_bw = 0;
            std::size_t treated_rows = 0;
            std::vector<double> y;
            for (const auto& r : bidder_rows) {
                if (std::abs(r.centered_score) > spec.bandwidth) continue;
                ++in_bw;
                if (r.centered_score >= 0.0) ++treated_rows;
                y.push_back(r.p_max);
            }
            auto exclude = [&](std::string reason) {
                slots[gi].exclusion = BidderExclusion{bidder, std::move(reason)};
            };
            if (in_bw < rules.min_rows) {
                exclude("not enough data (" + std::to_string(in_bw) + " rows in bandwidth)");
                continue;
            }
            if (treated_rows == 0 || treated_rows == in_bw) {
                exclude("no variation in treatment");
                continue;
            }
            if (stats::variance(y) < rules.min_variance) {
                exclude("not enough variation in maximum bids");
                continue;
            }
            try {
                PerBidderFit f;
                f.bidder_id = bidder;
                f.n_rows = in_bw;
                f.fit = fit_pooled(bidder_rows, per_spec);
                slots[gi].fit = std::move(f);
            } catch (const AmpError& e) {
                exclude(std::string("fit failed: ") + e.what());
            }
        }
    });

    PerBidderResult result;
    for (auto& slot : slots) {
        if (slot.fit) result.fits.push_back(std::move(*slot.fit));
        if (slot.exclusion) result.exclusions.push_back(std::move(*slot.exclusion));
    }

    auto& s = result.summary;
    s.analyzed = result.fits.size();
    s.excluded = result.exclusions.size();
    std::vector<double> effects;
    std::vector<double> significant_effects;
    for (const auto& f : result.fits) {
        const double est = f.fit.treatment_estimate();
        effects.push_back(est);
        if (f.fit.treatment_p() <= spec.alpha) significant_effects.push_back(est);
    }
    s.significant = significant_effects.size();
    s.significant_share =
        s.analyzed ? static_cast<double>(s.significant) / static_cast<double>(s.analyzed) : 0.0;
    if (!effects.empty()) {
        const auto q = stats::iqr(effects);
        s.median_effect = q.median;
        s.iqr_low = q.q1;
        s.iqr_high = q.q3;
    }
    if (!significant_effects.empty()) {
        const auto q = stats::iqr(significant_effects);
        s.median_effect_significant = q.median;
        s.iqr_low_significant = q.q1;
        s.iqr_high_significant = q.q3;
    }
    return result;
}

namespace {
const std::vector<std::string> kPanelHeader = {"hour",     "bidder_id",      "unit_id",
                                               "p_max",    "score",          "centered_score",
                                               "treatment", "ref",           "gas"};
}  // namespace

PanelData load_panel_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    PanelData out;
    for (const auto& row : csv::read_rows(path, kPanelHeader)) {
        const auto score = csv::parse_opt_double(row, 4, "score", file);
        const auto ref = csv::parse_opt_double(row, 7, "ref", file);
        if (!score || !ref) {
            ++out.n_excluded_missing;
            continue;
        }
        ObservationRow r;
        r.hour = parse_hour(row.fields[0]);
        r.bidder_id = row.fields[1];
        r.unit_id = row.fields[2];
        r.p_max = csv::parse_double(row, 3, "p_max", file);
        r.score = *score;
        r.centered_score = csv::parse_double(row, 5, "centered_score", file);
        r.treatment = csv::parse_double(row, 6, "treatment", file);
        r.ref = *ref;
        r.gas = csv::parse_double(row, 8, "gas", file);
        out.rows.push_back(std::move(r));
    }
    return out;
}

void write_panel_csv(const std::filesystem::path& path, std::span<const ObservationRow> rows) {
    csv::Writer w(kPanelHeader);
    for (const auto& r : rows) {
        w.add_row({format_hour(r.hour), r.bidder_id, r.unit_id, csv::format_double(r.p_max),
                   csv::format_double(r.score), csv::format_double(r.centered_score),
                   csv::format_double(r.treatment), csv::format_double(r.ref),
                   csv::format_double(r.gas)});
    }
    w.save(path);
}

}  // namespace ampsim::rdd
