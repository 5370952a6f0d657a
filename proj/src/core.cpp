#include "pfss/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfss/errors.hpp"

namespace pfss {

Instance::Instance(int machines, int jobs, std::vector<double> times)
    : m_(machines), n_(jobs), times_(std::move(times)) {
  if (m_ < 1 || n_ < 1) throw ValidationError("instance needs at least one machine and one job");
  if (times_.size() != static_cast<size_t>(m_) * n_)
    throw ValidationError("processing-time matrix has " + std::to_string(times_.size()) +
                          " entries, expected " + std::to_string(m_) + "x" + std::to_string(n_));
  for (double x : times_) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("processing times must be finite and non-negative");
  }
}

Instance Instance::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("instance needs at least one machine");
  std::vector<double> flat;
  const size_t n = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != n) throw ValidationError("ragged processing-time matrix");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Instance(static_cast<int>(rows.size()), static_cast<int>(n), std::move(flat));
}

std::vector<double> Instance::job_column(int job) const {
  std::vector<double> col(m_);
  for (int i = 0; i < m_; ++i) col[i] = at(i, job);
  return col;
}

double Instance::job_total(int job) const {
  double s = 0.0;
  for (int i = 0; i < m_; ++i) s += at(i, job);
  return s;
}

double Instance::mean_time() const {
  return std::accumulate(times_.begin(), times_.end(), 0.0) / static_cast<double>(times_.size());
}

bool is_permutation_of(const Permutation& perm, int n) {
  if (static_cast<int>(perm.size()) != n) return false;
  std::vector<char> seen(n, 0);
  for (int j : perm) {
    if (j < 0 || j >= n || seen[j]) return false;
    seen[j] = 1;
  }
  return true;
}

void validate_permutation(const Permutation& perm, int n) {
  if (static_cast<int>(perm.size()) != n)
    throw ValidationError("permutation has length " + std::to_string(perm.size()) + ", expected " +
                          std::to_string(n));
  std::vector<char> seen(n, 0);
  for (int j : perm) {
    if (j < 0 || j >= n) throw ValidationError("job index " + std::to_string(j) + " out of range");
    if (seen[j]) throw ValidationError("job index " + std::to_string(j) + " appears twice");
    seen[j] = 1;
  }
}

Permutation identity_permutation(int n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

CompletionMatrix completion_times(const Instance& inst, const Permutation& perm) {
  validate_permutation(perm, inst.jobs());
  const int m = inst.machines();
  const int n = inst.jobs();
  CompletionMatrix c(m, n);
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < m; ++i) {
      const double above = i > 0 ? c.at(i - 1, t) : 0.0;
      const double left = t > 0 ? c.at(i, t - 1) : 0.0;
      c.at(i, t) = std::max(above, left) + inst.at(i, perm[t]);
    }
  }
  return c;
}

double sequence_makespan(const Instance& inst, std::span<const int> seq) {
  const int m = inst.machines();
  std::vector<double> front(m, 0.0);
  for (int job : seq) front_advance_inplace(inst, front, job);
  return front.empty() ? 0.0 : front.back();
}

double makespan(const Instance& inst, const Permutation& perm) {
  validate_permutation(perm, inst.jobs());
  return sequence_makespan(inst, perm);
}

void front_advance_inplace(const Instance& inst, std::span<double> front, int job) {
  double prev = 0.0;
  for (int i = 0; i < inst.machines(); ++i) {
    prev = std::max(prev, front[i]) + inst.at(i, job);
    front[i] = prev;
  }
}

std::vector<double> front_advance(const Instance& inst, std::span<const double> front, int job) {
  if (static_cast<int>(front.size()) != inst.machines())
    throw ValidationError("front length must equal the machine count");
  if (job < 0 || job >= inst.jobs()) throw ValidationError("job index " + std::to_string(job) + " out of range");
  std::vector<double> out(front.begin(), front.end());
  front_advance_inplace(inst, out, job);
  return out;
}

std::vector<double> insertion_makespans(const Instance& inst, std::span<const int> seq, int job) {
  const int m = inst.machines();
  const int k = static_cast<int>(seq.size());
  // head(i, p): completion of machine i after the first p jobs.
  // tail(i, p): time from the start of position p on machine i to the end.
  std::vector<double> head(static_cast<size_t>(m) * (k + 1), 0.0);
  std::vector<double> tail(static_cast<size_t>(m) * (k + 1), 0.0);
  auto H = [&](int i, int p) -> double& { return head[static_cast<size_t>(p) * m + i]; };
  auto T = [&](int i, int p) -> double& { return tail[static_cast<size_t>(p) * m + i]; };
  for (int p = 1; p <= k; ++p) {
    for (int i = 0; i < m; ++i) {
      const double above = i > 0 ? H(i - 1, p) : 0.0;
      H(i, p) = std::max(above, H(i, p - 1)) + inst.at(i, seq[p - 1]);
    }
  }
  for (int p = k - 1; p >= 0; --p) {
    for (int i = m - 1; i >= 0; --i) {
      const double below = i + 1 < m ? T(i + 1, p) : 0.0;
      T(i, p) = std::max(below, T(i, p + 1)) + inst.at(i, seq[p]);
    }
  }
  std::vector<double> cost(k + 1);
  for (int p = 0; p <= k; ++p) {
    double f = 0.0;
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      f = std::max(f, H(i, p)) + inst.at(i, job);
      best = std::max(best, f + T(i, p));
    }
    cost[p] = best;
  }
  return cost;
}

double gap_percent(double value, double expert_value) {
  if (expert_value == 0.0) throw NumericError("gap is undefined for a zero expert makespan");
  return 100.0 * (value - expert_value) / expert_value;
}

}  // namespace pfss
