#pragma once

#include <span>

namespace pfss {

struct WilcoxonResult {
  int pairs = 0;           // nonzero differences used
  double w_plus = 0.0;     // rank sum of positive differences a - b
  double w_minus = 0.0;
  double statistic = 0.0;  // min(w_plus, w_minus)
  double z = 0.0;          // (w_plus - n(n+1)/4) / sd, positive when a tends to exceed b
  double p_value = 1.0;    // two-sided
  bool significant = false;
};

inline constexpr int kWilcoxonMinPairs = 6;

// Paired two-sided signed-rank test with the normal approximation. Zero
// differences are dropped, tied magnitudes share their average rank and the
// variance is reduced by sum(t^3 - t) / 48 over tie groups. No continuity
// correction. Throws ValidationError on unequal lengths or fewer than
// kWilcoxonMinPairs nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

}  // namespace pfss
