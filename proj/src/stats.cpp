#include "pfss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "pfss/errors.hpp"

namespace pfss {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw ValidationError("paired samples must have equal length");
  std::vector<double> diff;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diff.push_back(a[i] - b[i]);
  const int n = static_cast<int>(diff.size());
  if (n < kWilcoxonMinPairs)
    throw ValidationError("signed-rank test needs at least " + std::to_string(kWilcoxonMinPairs) +
                          " nonzero differences, got " + std::to_string(n));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return std::abs(diff[x]) < std::abs(diff[y]); });

  WilcoxonResult r;
  r.pairs = n;
  double tie_term = 0.0;
  for (int lo = 0; lo < n;) {
    int hi = lo + 1;
    while (hi < n && std::abs(diff[order[hi]]) == std::abs(diff[order[lo]])) ++hi;
    const double rank = 0.5 * (lo + 1 + hi);  // average of ranks lo+1 .. hi
    const double t = hi - lo;
    tie_term += t * t * t - t;
    for (int i = lo; i < hi; ++i) (diff[order[i]] > 0 ? r.w_plus : r.w_minus) += rank;
    lo = hi;
  }
  const double nn = n;
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  r.statistic = std::min(r.w_plus, r.w_minus);
  r.z = (r.w_plus - mean) / std::sqrt(var);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  r.significant = r.p_value < alpha;
  return r;
}

}  // namespace pfss
