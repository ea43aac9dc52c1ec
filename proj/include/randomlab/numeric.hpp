#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "randomlab/common.hpp"

namespace randomlab {

template <typename Container>
double mean_of(const Container& v) {
  check(v.size() > 0, "mean of empty range");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased sample variance, 1/(n-1) normalization.
template <typename Container>
double sample_variance(const Container& v) {
  const std::size_t n = v.size();
  check(n >= 2, "sample variance needs at least two values");
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

// Inverse standard normal CDF (Acklam's rational approximation, |err| ~ 1e-9).
inline double normal_quantile(double p) {
  check(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - plow) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Regularized incomplete beta I_x(a,b) via Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  check(a > 0.0 && b > 0.0, "incomplete_beta requires positive shape");
  check(x >= 0.0 && x <= 1.0, "incomplete_beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  auto contfrac = [](double aa, double bb, double xx) {
    const double eps = 1e-14;
    const double fpmin = 1e-300;
    const double qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * xx / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const int m2 = 2 * m;
      double numer = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
      d = 1.0 + numer * d;
      if (std::fabs(d) < fpmin) d = fpmin;
      c = 1.0 + numer / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      h *= d * c;
      numer = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
      d = 1.0 + numer * d;
      if (std::fabs(d) < fpmin) d = fpmin;
      c = 1.0 + numer / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
  };

  const double lnfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(lnfront) * contfrac(a, b, x) / a;
  }
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log1p(-x) + a * std::log(x)) *
                   contfrac(b, a, 1.0 - x) / b;
}

// Upper tail P(F > f) for the F(d1, d2) distribution.
inline double f_sf(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

// Two-sample Kolmogorov-Smirnov distance; inputs need not be sorted.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  check(!a.empty() && !b.empty(), "ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na -
                                    static_cast<double>(j) / nb));
  }
  return best;
}

}  // namespace randomlab
