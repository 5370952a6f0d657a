#pragma once

// Behaviour cloning of the policy on expert traces, and greedy evaluation.

#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include "pfss/core.hpp"
#include "pfss/mdp.hpp"
#include "pfss/policy.hpp"

namespace pfss {

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 1e-4;
  double decay = 0.96;  // learning rate multiplier applied after every epoch
  int epochs = 20;
  uint64_t seed = 0;
  int checkpoint_every = 1;         // epochs between checkpoints; 0 keeps only the final one
  std::filesystem::path out_dir;    // checkpoints and train_log.ndjson; empty writes nothing
  int eval_threads = 1;

  void validate() const;
};

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(PolicyParams& params, double lr);
  long steps() const { return t_; }

 private:
  double b1_, b2_, eps_;
  long t_ = 0;
  std::vector<ad::Mat> m_, v_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_gap = 0.0;  // NaN when no validation set was given
  double elapsed_s = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochLog> log;
};

// Traces refer to train_set by instance_id. Validation gaps are measured
// against NEH on val_set after every epoch. Each log record is also written
// as one JSON line to `log_out` when given.
TrainResult train(const TrainConfig& config, PolicyParams params, const std::vector<Instance>& train_set,
                  const std::vector<ExpertTrace>& traces, const std::vector<Instance>& val_set,
                  std::ostream* log_out = nullptr);

struct EvalResult {
  std::vector<Permutation> perms;
  std::vector<double> makespans;
  std::vector<double> gaps;  // per instance, percent over the expert
  double mean_makespan = 0.0;
  double mean_gap = 0.0;
  double time_s = 0.0;
};

// Greedy rollout on every instance, gaps against expert_makespans.
// Throws DataError when the instances' machine count differs from the policy's.
EvalResult evaluate(const PolicyParams& params, const std::vector<Instance>& instances,
                    const std::vector<double>& expert_makespans, int threads = 1);

// Same bookkeeping for any per-instance solver.
EvalResult evaluate_solver(const std::function<Permutation(const Instance&)>& solver,
                           const std::vector<Instance>& instances, const std::vector<double>& expert_makespans,
                           int threads = 1);

}  // namespace pfss
