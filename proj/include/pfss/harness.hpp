#pragma once

// Experiment layer behind the command-line tool: named solvers, multi-seed
// runs with gaps against an expert, significance tests and sweeps.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfss/core.hpp"
#include "pfss/policy.hpp"
#include "pfss/report.hpp"

namespace pfss::harness {

// Defaults calibrated so the baselines sit at the gap levels the heuristics
// literature reports at 20 jobs; every value is overridable.
struct MethodParams {
  long rs_samples = 10;
  std::optional<double> rs_time_s;  // per instance; replaces the sample budget when set
  long ils_iterations = 1;
  int ils_passes = 1;
  int ils_strength = 2;
  long ig_iterations = 1;
  int ig_passes = 1;
  int ig_destruction = 4;
  double ig_temperature = -1.0;
};

// A solver returns a permutation for an instance and a per-run seed.
using Solver = std::function<Permutation(const Instance&, uint64_t seed)>;

struct Method {
  std::string name;  // label used in reports
  Solver solve;
  int machines = 0;  // nonzero for learned policies, which only accept that machine count
};

// Names: neh, rs, ils, ig, brute-force, or policy:<checkpoint path>.
// Throws ValidationError for an unknown name.
Method make_method(const std::string& name, const MethodParams& params = {});
std::vector<std::string> known_methods();

struct SolveOptions {
  std::vector<std::string> methods;
  int seeds = 3;
  uint64_t seed = 0;
  std::string expert = "neh";
  MethodParams params;
  int threads = 1;  // > 1 solves instances in parallel; timings then overlap
  std::string group;

  void validate() const;
};

// Runs every method for every seed on every instance. Gaps are per instance
// against the expert's makespan and macro-averaged. The expert itself is run
// once (it must be deterministic) and always appears as a row with gap 0.
Report solve(const std::vector<Instance>& instances, const SolveOptions& options);

// Appends the rows of `part` to `into`, merging metadata under part's group.
void append(Report& into, Report part);

struct SigmaSweepOptions {
  std::vector<double> sigmas{0, 2, 4, 6};
  double mean = 6.0;
  int count = 100;
  int jobs = 20;
  int machines = 5;
  std::string method_a;
  std::string method_b;
  SolveOptions base;  // seeds, expert, params, threads
};

Report sweep_sigma(const SigmaSweepOptions& options);

struct MachineSweepOptions {
  std::vector<int> machines{5, 10, 20};
  int count = 100;
  int jobs = 20;
  SolveOptions base;  // methods and the rest
};

// Learned methods are only run on groups whose machine count they accept.
Report sweep_machines(const MachineSweepOptions& options);

}  // namespace pfss::harness
