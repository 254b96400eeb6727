#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace qflrl::testing {

// Wilson-Hilferty approximation to the chi-square quantile; good to ~1%
// for the confidence levels used in these tests.
inline double chi_square_quantile(std::size_t dof, double z_score) {
  const double k = static_cast<double>(dof);
  const double a = 2.0 / (9.0 * k);
  const double base = 1.0 - a + z_score * std::sqrt(a);
  return k * base * base * base;
}

inline double chi_square_99(std::size_t dof) { return chi_square_quantile(dof, 2.3263); }
inline double chi_square_999(std::size_t dof) { return chi_square_quantile(dof, 3.0902); }

// Pearson statistic for observed counts against expected probabilities.
inline double chi_square_statistic(const std::vector<std::size_t>& counts,
                                   const std::vector<double>& probs, std::size_t total) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = probs[i] * static_cast<double>(total);
    if (expected == 0.0) continue;
    const double d = static_cast<double>(counts[i]) - expected;
    stat += d * d / expected;
  }
  return stat;
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - out.mean) * (x - out.mean);
  var /= (n - 1.0);
  out.stderr_of_mean = std::sqrt(var / n);
  return out;
}

}  // namespace qflrl::testing
