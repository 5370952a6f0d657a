#include "pfss/heuristics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "pfss/errors.hpp"
#include "pfss/rng.hpp"

namespace pfss {

namespace {

using Clock = std::chrono::steady_clock;

class Deadline {
 public:
  explicit Deadline(const HeuristicBudget& b) : start_(Clock::now()), limit_(b.max_time_s) {}
  bool expired() const { return limit_ && elapsed() >= *limit_; }
  std::optional<double> remaining() const {
    if (!limit_) return std::nullopt;
    return std::max(0.0, *limit_ - elapsed());
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  Clock::time_point start_;
  std::optional<double> limit_;
};

bool iterations_left(const HeuristicBudget& b, long done) {
  return !b.max_iterations || done < *b.max_iterations;
}

Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  rng.shuffle(std::span<int>(p));
  return p;
}

// Remove the job at `from` and reinsert it at its best position.
// Returns the resulting makespan.
double reinsert_best(const Instance& inst, Permutation& seq, int from) {
  const int job = seq[from];
  seq.erase(seq.begin() + from);
  const auto costs = insertion_makespans(inst, seq, job);
  const int pos = best_insertion_position(costs);
  seq.insert(seq.begin() + pos, job);
  return costs[pos];
}

void polish(const Instance& inst, Permutation& perm, double& value, const Deadline& deadline, int max_passes) {
  HeuristicBudget inner;
  inner.max_time_s = deadline.remaining();
  if (max_passes > 0) inner.max_iterations = max_passes;
  if (deadline.expired()) return;
  auto r = local_search_insert(inst, perm, inner);
  perm = std::move(r.perm);
  value = r.makespan;
}

}  // namespace

void HeuristicBudget::validate() const {
  if (!max_iterations && !max_time_s) throw ValidationError("budget needs max_iterations or max_time_s");
  if (max_iterations && *max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
  if (max_time_s && !(*max_time_s >= 0.0)) throw ValidationError("max_time_s must be >= 0");
}

void IgParams::validate(int jobs) const {
  if (destruction_size < 1 || destruction_size >= jobs)
    throw ValidationError("destruction size must satisfy 1 <= d < n (d=" + std::to_string(destruction_size) +
                          ", n=" + std::to_string(jobs) + ")");
  budget.validate();
}

SolveResult random_search(const Instance& inst, const HeuristicBudget& budget) {
  budget.validate();
  const int n = inst.jobs();
  Rng rng(budget.seed);
  Deadline deadline(budget);
  SolveResult best;
  best.perm = identity_permutation(n);
  best.makespan = sequence_makespan(inst, best.perm);
  if (n == 1) return best;
  bool first = true;
  long it = 0;
  for (; iterations_left(budget, it) && !deadline.expired(); ++it) {
    Permutation cand = random_permutation(n, rng);
    const double v = sequence_makespan(inst, cand);
    if (first || v < best.makespan) {
      best.perm = std::move(cand);
      best.makespan = v;
      first = false;
    }
    best.history.push_back(best.makespan);
  }
  return best;
}

SolveResult local_search_insert(const Instance& inst, const Permutation& start, const HeuristicBudget& budget) {
  validate_permutation(start, inst.jobs());
  const int n = inst.jobs();
  Deadline deadline(budget);
  SolveResult res;
  res.perm = start;
  res.makespan = sequence_makespan(inst, start);
  if (n == 1) return res;
  long passes = 0;
  bool improved = true;
  while (improved && iterations_left(budget, passes) && !deadline.expired()) {
    improved = false;
    // Scan jobs in the order they appear at the start of the pass.
    const Permutation jobs = res.perm;
    for (int job : jobs) {
      const int from = static_cast<int>(std::find(res.perm.begin(), res.perm.end(), job) - res.perm.begin());
      Permutation cand = res.perm;
      const double v = reinsert_best(inst, cand, from);
      if (v < res.makespan) {
        res.perm = std::move(cand);
        res.makespan = v;
        improved = true;
      }
      if (deadline.expired()) break;
    }
    ++passes;
    res.history.push_back(res.makespan);
  }
  res.makespan = sequence_makespan(inst, res.perm);
  return res;
}

SolveResult iterated_local_search(const Instance& inst, const HeuristicBudget& budget, int perturbation_strength,
                                  int ls_max_passes) {
  budget.validate();
  if (perturbation_strength < 1) throw ValidationError("perturbation strength must be >= 1");
  const int n = inst.jobs();
  Rng rng(budget.seed);
  Deadline deadline(budget);

  Permutation cur = random_permutation(n, rng);
  double cur_v = sequence_makespan(inst, cur);
  polish(inst, cur, cur_v, deadline, ls_max_passes);
  SolveResult best{cur, cur_v, {}};
  if (n == 1) return best;

  for (long it = 0; iterations_left(budget, it) && !deadline.expired(); ++it) {
    Permutation cand = cur;
    for (int s = 0; s < perturbation_strength; ++s) {
      const auto a = rng.below(n);
      const auto b = rng.below(n);
      std::swap(cand[a], cand[b]);
    }
    double v = sequence_makespan(inst, cand);
    polish(inst, cand, v, deadline, ls_max_passes);
    if (v < cur_v) {
      cur = std::move(cand);
      cur_v = v;
    }
    if (cur_v < best.makespan) {
      best.perm = cur;
      best.makespan = cur_v;
    }
    best.history.push_back(best.makespan);
  }
  best.makespan = sequence_makespan(inst, best.perm);
  return best;
}

SolveResult iterated_greedy(const Instance& inst, const IgParams& params) {
  const int n = inst.jobs();
  if (n == 1) {
    params.budget.validate();
    return neh(inst);
  }
  params.validate(n);
  const double temperature = params.temperature < 0.0 ? inst.mean_time() / 10.0 : params.temperature;
  Rng rng(params.budget.seed);
  Deadline deadline(params.budget);

  Permutation cur;
  double cur_v;
  if (params.init == IgInit::kNeh) {
    auto r = neh(inst);
    cur = std::move(r.perm);
    cur_v = r.makespan;
  } else {
    cur = random_permutation(n, rng);
    cur_v = sequence_makespan(inst, cur);
    polish(inst, cur, cur_v, deadline, params.ls_max_passes);
  }
  SolveResult best{cur, cur_v, {}};

  for (long it = 0; iterations_left(params.budget, it) && !deadline.expired(); ++it) {
    Permutation partial = cur;
    std::vector<int> removed;
    removed.reserve(params.destruction_size);
    for (int r = 0; r < params.destruction_size; ++r) {
      const auto idx = rng.below(partial.size());
      removed.push_back(partial[idx]);
      partial.erase(partial.begin() + static_cast<long>(idx));
    }
    double v = 0.0;
    for (int job : removed) {
      const auto costs = insertion_makespans(inst, partial, job);
      const int pos = best_insertion_position(costs);
      partial.insert(partial.begin() + pos, job);
      v = costs[pos];
    }
    polish(inst, partial, v, deadline, params.ls_max_passes);

    if (v < cur_v) {
      cur = std::move(partial);
      cur_v = v;
    } else if (temperature > 0.0 && rng.uniform01() <= std::exp(-(v - cur_v) / temperature)) {
      cur = std::move(partial);
      cur_v = v;
    }
    if (cur_v < best.makespan) {
      best.perm = cur;
      best.makespan = cur_v;
    }
    best.history.push_back(best.makespan);
  }
  best.makespan = sequence_makespan(inst, best.perm);
  return best;
}

Permutation neh_order(const Instance& inst) {
  const int n = inst.jobs();
  std::vector<double> totals(n);
  for (int j = 0; j < n; ++j) totals[j] = inst.job_total(j);
  Permutation order = identity_permutation(n);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return totals[a] > totals[b]; });
  return order;
}

int best_insertion_position(const std::vector<double>& costs) {
  int best = 0;
  for (int p = 1; p < static_cast<int>(costs.size()); ++p) {
    if (costs[p] <= costs[best]) best = p;
  }
  return best;
}

SolveResult neh(const Instance& inst, std::vector<NehStep>* steps) {
  const Permutation order = neh_order(inst);
  Permutation seq;
  seq.reserve(order.size());
  for (int job : order) {
    auto costs = insertion_makespans(inst, seq, job);
    const int pos = best_insertion_position(costs);
    seq.insert(seq.begin() + pos, job);
    if (steps) steps->push_back(NehStep{job, std::move(costs), pos});
  }
  // Head/tail sums can differ from the recurrence in the last ulp.
  const double value = sequence_makespan(inst, seq);
  return SolveResult{std::move(seq), value, {}};
}

}  // namespace pfss
