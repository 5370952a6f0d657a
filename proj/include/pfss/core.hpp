#pragma once

// Instance / permutation model and the makespan semantics of the permutation
// flow shop: every job visits machines 0..m-1 in order, one job per machine at
// a time, no preemption, all machines process jobs in the same order.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pfss {

using Permutation = std::vector<int>;

class Instance {
 public:
  Instance() = default;
  // times is row-major, machines x jobs.
  Instance(int machines, int jobs, std::vector<double> times);
  static Instance from_rows(const std::vector<std::vector<double>>& rows);

  int machines() const { return m_; }
  int jobs() const { return n_; }
  double at(int machine, int job) const { return times_[static_cast<size_t>(machine) * n_ + job]; }
  const std::vector<double>& times() const { return times_; }
  std::span<const double> machine_row(int machine) const {
    return {times_.data() + static_cast<size_t>(machine) * n_, static_cast<size_t>(n_)};
  }
  // Processing times of one job across machines (the job's feature vector).
  std::vector<double> job_column(int job) const;
  double job_total(int job) const;
  double mean_time() const;

  std::string name;
  std::string source;
  std::optional<uint64_t> seed;

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.m_ == b.m_ && a.n_ == b.n_ && a.times_ == b.times_;
  }

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<double> times_;
};

class CompletionMatrix {
 public:
  CompletionMatrix(int machines, int positions)
      : m_(machines), n_(positions), c_(static_cast<size_t>(machines) * positions, 0.0) {}
  int machines() const { return m_; }
  int positions() const { return n_; }
  double& at(int machine, int position) { return c_[static_cast<size_t>(machine) * n_ + position]; }
  double at(int machine, int position) const { return c_[static_cast<size_t>(machine) * n_ + position]; }
  double makespan() const { return c_.empty() ? 0.0 : c_.back(); }

 private:
  int m_;
  int n_;
  std::vector<double> c_;
};

// Throws ValidationError unless perm is a bijection on [0, n).
void validate_permutation(const Permutation& perm, int n);
bool is_permutation_of(const Permutation& perm, int n);
Permutation identity_permutation(int n);

CompletionMatrix completion_times(const Instance& inst, const Permutation& perm);

double makespan(const Instance& inst, const Permutation& perm);

// Makespan of a (possibly partial) sequence without validation; used on hot paths.
double sequence_makespan(const Instance& inst, std::span<const int> seq);

std::vector<double> front_advance(const Instance& inst, std::span<const double> front, int job);
void front_advance_inplace(const Instance& inst, std::span<double> front, int job);

// Makespan of seq with job inserted at each position 0..seq.size(), computed
// with head/tail matrices in O(m * seq.size()).
std::vector<double> insertion_makespans(const Instance& inst, std::span<const int> seq, int job);

double gap_percent(double value, double expert_value);

}  // namespace pfss
