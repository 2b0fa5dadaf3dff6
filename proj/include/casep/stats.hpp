#pragma once

// Streaming moments with a pairwise merge, and small fitting helpers.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "casep/errors.hpp"

namespace casep {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Welford / Pebay update for mean, M2, M3. merge() is exact in arithmetic but
// not bit-for-bit associative; reductions that must be reproducible merge in
// a fixed order.
class RunningStats {
 public:
  void push(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double dn = delta / n;
    const double term = delta * dn * n1;
    mean_ += dn;
    m3_ += term * dn * (n - 2) - 3 * dn * m2_;
    m2_ += term;
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double delta = o.mean_ - mean_;
    const double m2 = m2_ + o.m2_ + delta * delta * na * nb / n;
    const double m3 = m3_ + o.m3_ + delta * delta * delta * na * nb * (na - nb) / (n * n) +
                      3 * delta * (na * o.m2_ - nb * m2_) / n;
    mean_ += delta * nb / n;
    m2_ = m2;
    m3_ = m3;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  // Unbiased sample variance.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double se() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  // Sample skewness g1 = m3 / m2^{3/2} (population moments).
  double skewness() const {
    if (n_ < 3 || m2_ <= 0) return 0.0;
    const double n = static_cast<double>(n_);
    return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
  }
  // Large-sample SE of the skewness under normality.
  double skewness_se() const {
    if (n_ < 3) return 0.0;
    const double n = static_cast<double>(n_);
    return std::sqrt(6.0 * (n - 2) / ((n + 1) * (n + 3)));
  }
  // SE of the sample variance under normality.
  double variance_se() const {
    if (n_ < 2) return 0.0;
    return variance() * std::sqrt(2.0 / static_cast<double>(n_ - 1));
  }

  Estimate mean_estimate() const { return {mean(), se(), n_}; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
};

inline RunningStats stats_of(std::span<const double> xs) {
  RunningStats s;
  for (double x : xs) s.push(x);
  return s;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw OutOfRange("linear fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw OutOfRange("linear fit needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

// |mean| <= k SE.
inline bool within_band(const Estimate& e, double target, double k = 3.0) {
  return std::fabs(e.value - target) <= k * e.se;
}

// Two-batch rule: a statistical check fails only when two independent seed
// batches both fail.
inline bool two_batch_pass(bool first_batch_pass, bool second_batch_pass) {
  return first_batch_pass || second_batch_pass;
}

}  // namespace casep
