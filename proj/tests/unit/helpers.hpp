#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pfss/core.hpp"

namespace testing {

// Small integer processing times keep makespans exact in double arithmetic.
inline pfss::Instance random_instance(std::mt19937_64& gen, int machines, int jobs, int max_time = 20) {
  std::uniform_int_distribution<int> d(0, max_time);
  std::vector<double> t(static_cast<size_t>(machines) * jobs);
  for (double& v : t) v = d(gen);
  return pfss::Instance(machines, jobs, std::move(t));
}

inline pfss::Permutation random_perm(std::mt19937_64& gen, int n) {
  pfss::Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), gen);
  return p;
}

// Textbook completion-time table with explicit boundary cases.
inline double recurrence_makespan(const pfss::Instance& inst, const pfss::Permutation& perm) {
  const int m = inst.machines();
  const int n = static_cast<int>(perm.size());
  std::vector<std::vector<double>> c(m, std::vector<double>(n));
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < n; ++t) {
      const double up = i > 0 ? c[i - 1][t] : 0.0;
      const double left = t > 0 ? c[i][t - 1] : 0.0;
      c[i][t] = std::max(up, left) + inst.at(i, perm[t]);
    }
  return n == 0 ? 0.0 : c[m - 1][n - 1];
}

// NEH with a full makespan evaluation for every candidate position. Equal
// costs go to the latest position unless `earliest_ties` is set.
inline pfss::Permutation naive_neh(const pfss::Instance& inst, bool earliest_ties = false) {
  const int n = inst.jobs();
  pfss::Permutation order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return inst.job_total(a) > inst.job_total(b); });
  pfss::Permutation seq;
  for (int job : order) {
    pfss::Permutation best;
    double best_v = 0.0;
    for (size_t pos = 0; pos <= seq.size(); ++pos) {
      pfss::Permutation cand = seq;
      cand.insert(cand.begin() + static_cast<long>(pos), job);
      const double v = recurrence_makespan(inst, cand);
      if (best.empty() || v < best_v || (!earliest_ties && v == best_v)) {
        best = cand;
        best_v = v;
      }
    }
    seq = best;
  }
  return seq;
}

// Minimum over all permutations via std::next_permutation.
inline double exhaustive_optimum(const pfss::Instance& inst) {
  pfss::Permutation p(inst.jobs());
  std::iota(p.begin(), p.end(), 0);
  double best = recurrence_makespan(inst, p);
  while (std::next_permutation(p.begin(), p.end())) best = std::min(best, recurrence_makespan(inst, p));
  return best;
}

}  // namespace testing
