#pragma once

// Exact optimum by enumeration, and the mixed-integer model (dummy job 0,
// immediate-precedence binaries, big-M machine bounds) as an exportable text
// model with a feasibility checker.

#include <string>
#include <vector>

#include "pfss/core.hpp"
#include "pfss/heuristics.hpp"

namespace pfss {

inline constexpr int kBruteForceMaxJobs = 10;

// Lexicographically smallest optimal permutation. Throws ValidationError for
// more than kBruteForceMaxJobs jobs.
SolveResult brute_force(const Instance& inst);

enum class MipTag {
  kPredecessor = 2,  // every job of J' has exactly one predecessor
  kSuccessor = 3,    // every job of J' has exactly one successor
  kPrecedence = 4,   // big-M sequencing on each machine
  kMakespan = 5,
  kMachineChain = 6,
  kBinary = 7,
  kNonNegative = 8,
};

struct LinearTerm {
  double coef;
  std::string var;
};

struct MipConstraint {
  MipTag tag;
  std::string name;
  std::vector<LinearTerm> terms;
  enum class Sense { kLessEq, kEq } sense;
  double rhs;
};

struct MipModel {
  int machines = 0;
  int jobs = 0;
  std::vector<double> big_m;  // A_0 .. A_m, A_0 = 0
  std::vector<std::string> continuous;  // y_i_j and Cmax
  std::vector<std::string> binaries;    // z_j_k over J' x J', j != k
  std::vector<MipConstraint> constraints;

  size_t count(MipTag tag) const;
};

// Variable names use 1-based machines and jobs; job 0 is the dummy job.
MipModel build_mip(const Instance& inst);

// CPLEX LP text, LF line endings.
std::string emit_mip(const Instance& inst);
std::string to_lp(const MipModel& model, const std::string& title = "pfss");

// y is machines x jobs (start times), z is (jobs+1) x (jobs+1) with row/col 0
// the dummy job and job j at index j+1.
struct MipSolution {
  std::vector<std::vector<double>> y;
  std::vector<std::vector<double>> z;
  double cmax = 0.0;
};

struct MipViolation {
  MipTag tag;
  std::string detail;
};

inline constexpr double kMipTolerance = 1e-6;

// Canonical embedding of a permutation: y from completion times minus
// processing times, z from adjacency (dummy job opens and closes the chain).
MipSolution embed_permutation(const Instance& inst, const Permutation& perm);

std::vector<MipViolation> mip_violations(const Instance& inst, const MipSolution& sol, double tol = kMipTolerance);
bool check_mip_solution(const Instance& inst, const std::vector<std::vector<double>>& y,
                        const std::vector<std::vector<double>>& z, double cmax, double tol = kMipTolerance);

}  // namespace pfss
