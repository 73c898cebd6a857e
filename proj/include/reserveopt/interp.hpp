#pragma once

#include <algorithm>
#include <cmath>

namespace reserveopt {

// Monotone (Fritsch-Carlson) cubic Hermite slopes on a uniform grid with
// spacing h. Shape-preserving: no overshoot at kinks, which keeps exercise
// boundaries stable under repeated resampling.
inline void pchip_slopes(const double* y, int n, double h, double* d) {
  if (n == 1) {
    d[0] = 0.0;
    return;
  }
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / h;
    return;
  }
  auto delta = [&](int i) { return (y[i + 1] - y[i]) / h; };
  for (int i = 1; i + 1 < n; ++i) {
    const double dl = delta(i - 1), dr = delta(i);
    d[i] = (dl * dr > 0.0) ? 2.0 * dl * dr / (dl + dr) : 0.0;
  }
  auto edge = [&](double d0, double d1) {
    // three-point one-sided estimate, clipped for shape preservation
    double s = 0.5 * (3.0 * d0 - d1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  };
  d[0] = edge(delta(0), delta(1));
  d[n - 1] = edge(delta(n - 2), delta(n - 3));
}

inline double pchip_eval(const double* y, const double* d, int n, double x0, double h,
                         double xq) {
  int i = static_cast<int>(std::floor((xq - x0) / h));
  i = std::clamp(i, 0, n - 2);
  const double s = std::clamp((xq - x0 - i * h) / h, 0.0, 1.0);
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * y[i] + h * h10 * d[i] + h01 * y[i + 1] + h * h11 * d[i + 1];
}

// Resample n samples of y (at x0 + i*h) onto nq query points; queries outside
// the range are clamped to the end values. slope_buf must hold n doubles.
inline void pchip_resample(const double* y, int n, double x0, double h, const double* xq,
                           int nq, double* out, double* slope_buf) {
  pchip_slopes(y, n, h, slope_buf);
  for (int q = 0; q < nq; ++q) out[q] = pchip_eval(y, slope_buf, n, x0, h, xq[q]);
}

}  // namespace reserveopt
