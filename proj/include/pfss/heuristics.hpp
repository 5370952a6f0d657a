#pragma once

// Baseline solvers and the NEH expert.

#include <cstdint>
#include <optional>
#include <vector>

#include "pfss/core.hpp"

namespace pfss {

struct HeuristicBudget {
  std::optional<long> max_iterations;
  std::optional<double> max_time_s;
  uint64_t seed = 0;

  void validate() const;
};

struct SolveResult {
  Permutation perm;
  double makespan = 0.0;
  // Best-so-far makespan after each outer iteration (RS, ILS, IG).
  std::vector<double> history;
};

enum class IgInit {
  kRandomLocalSearch,  // random permutation polished by insertion local search
  kNeh,
};

struct IgParams {
  int destruction_size = 4;
  // Negative means "use mean(x_ij) / 10" for the instance at hand.
  double temperature = -1.0;
  IgInit init = IgInit::kRandomLocalSearch;
  // Cap on insertion passes per local search call; 0 runs to a local optimum.
  int ls_max_passes = 0;
  HeuristicBudget budget;

  void validate(int jobs) const;
};

SolveResult random_search(const Instance& inst, const HeuristicBudget& budget);

// First-improvement insertion neighbourhood, repeated until no pass improves
// or the budget (max_iterations = passes) runs out.
SolveResult local_search_insert(const Instance& inst, const Permutation& start,
                                const HeuristicBudget& budget = {});

SolveResult iterated_local_search(const Instance& inst, const HeuristicBudget& budget,
                                  int perturbation_strength = 2, int ls_max_passes = 0);

SolveResult iterated_greedy(const Instance& inst, const IgParams& params);

// One NEH insertion step, kept for inspection by tests.
struct NehStep {
  int job = -1;
  std::vector<double> position_costs;
  int chosen = -1;
};

// Phase 1 order: nonincreasing total processing time, ties by lower index.
Permutation neh_order(const Instance& inst);

// Index of the position to use among insertion costs; on equal cost the
// latest position wins, which keeps already-placed jobs ahead of the newcomer.
int best_insertion_position(const std::vector<double>& costs);

SolveResult neh(const Instance& inst, std::vector<NehStep>* steps = nullptr);

}  // namespace pfss
