#pragma once

// Sequential job selection as a Markov decision process: the state is the
// scheduled prefix plus the unscheduled set, an action appends one
// unscheduled job. No reward is carried; makespan is evaluated afterwards.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pfss/core.hpp"

namespace pfss {

class ScheduleState {
 public:
  ScheduleState() = default;
  explicit ScheduleState(int jobs);

  int jobs() const { return n_; }
  int step_index() const { return static_cast<int>(scheduled_.size()); }
  bool terminal() const { return step_index() == n_; }
  const std::vector<int>& scheduled() const { return scheduled_; }
  bool is_unscheduled(int job) const { return free_[job] != 0; }
  std::vector<int> unscheduled() const;

  friend bool operator==(const ScheduleState&, const ScheduleState&) = default;

 private:
  friend ScheduleState step(const ScheduleState& state, int action);
  int n_ = 0;
  std::vector<int> scheduled_;
  std::vector<char> free_;
};

ScheduleState reset(const Instance& inst);
ScheduleState reset(int jobs);
// Throws ValidationError if action is out of range or already scheduled.
ScheduleState step(const ScheduleState& state, int action);
std::vector<bool> mask(const ScheduleState& state);

// Expert actions for one instance. States are not stored: state t is the
// replay of the first t actions.
struct ExpertTrace {
  int instance_id = 0;
  std::vector<int> actions;

  int length() const { return static_cast<int>(actions.size()); }
  ScheduleState state_at(int t) const;
};

using Expert = std::function<Permutation(const Instance&)>;
Expert neh_expert();

std::vector<ExpertTrace> record_expert_traces(const std::vector<Instance>& instances, const Expert& expert = neh_expert());

// Throws DataError if the trace is not a permutation of [0, jobs).
void validate_trace(const ExpertTrace& trace, int jobs);

inline constexpr uint8_t kTraceVersion = 1;

struct TraceFile {
  int machines = 0;
  std::string expert;
  std::string dataset;  // path of the instances the traces refer to, may be empty
  std::vector<ExpertTrace> traces;
};

void save_traces(const std::filesystem::path& path, const TraceFile& file);
TraceFile load_traces(const std::filesystem::path& path);

}  // namespace pfss
