#include "ampsim/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "ampsim/errors.hpp"

namespace ampsim::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double t_two_sided_p(double t, double dof) {
    if (!(dof > 0)) fail(Errc::InvalidFraction, "t distribution needs dof > 0");
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double t_critical(double alpha_two_sided, double dof) {
    if (!(dof > 0)) fail(Errc::InvalidFraction, "t distribution needs dof > 0");
    if (!(alpha_two_sided > 0.0 && alpha_two_sided < 1.0)) {
        fail(Errc::InvalidFraction, "alpha must be in (0,1)");
    }
    boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, alpha_two_sided / 2.0));
}

double mean(std::span<const double> xs) {
    if (xs.empty()) fail(Errc::EmptySample, "mean of empty sample");
    NeumaierSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.empty()) fail(Errc::EmptySample, "variance of empty sample");
    double m = mean(xs);
    NeumaierSum s;
    for (double x : xs) s.add((x - m) * (x - m));
    return s.value() / static_cast<double>(xs.size());
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) fail(Errc::EmptySample, "quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) fail(Errc::InvalidFraction, "quantile q outside [0,1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    return quantile_sorted(xs, q);
}

Iqr iqr(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return Iqr{quantile_sorted(xs, 0.5), quantile_sorted(xs, 0.25), quantile_sorted(xs, 0.75)};
}

}  // namespace ampsim::stats
