#pragma once

#include <span>
#include <vector>

namespace ampsim::stats {

// Standard normal CDF.
double normal_cdf(double z);

// Two-sided p-value and upper-tail critical value for Student's t.
double t_two_sided_p(double t, double dof);
double t_critical(double alpha_two_sided, double dof);

// Neumaier-compensated summation: deterministic, order-dependent, and far
// more accurate than naive accumulation for long +/- mixed series.
class NeumaierSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double mean(std::span<const double> xs);       // throws EmptySample on empty
double variance(std::span<const double> xs);   // population variance (n divisor)

// Linear-interpolation quantile (R type 7) on an already sorted sample,
// q in [0, 1]. Throws EmptySample on empty, InvalidFraction on bad q.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> xs, double q);  // copies + sorts

struct Iqr {
    double median;
    double q1;
    double q3;
};
Iqr iqr(std::vector<double> xs);

}  // namespace ampsim::stats
