#include "pfss/mdp.hpp"

#include "pfss/container.hpp"
#include "pfss/errors.hpp"
#include "pfss/heuristics.hpp"

namespace pfss {

ScheduleState::ScheduleState(int jobs) : n_(jobs), free_(jobs, 1) {
  if (jobs < 1) throw ValidationError("a schedule needs at least one job");
  scheduled_.reserve(jobs);
}

std::vector<int> ScheduleState::unscheduled() const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (free_[j]) out.push_back(j);
  return out;
}

ScheduleState reset(int jobs) { return ScheduleState(jobs); }
ScheduleState reset(const Instance& inst) { return ScheduleState(inst.jobs()); }

ScheduleState step(const ScheduleState& state, int action) {
  if (action < 0 || action >= state.n_) throw ValidationError("action " + std::to_string(action) + " out of range");
  if (!state.free_[action])
    throw ValidationError("masked action: job " + std::to_string(action) + " is already scheduled");
  ScheduleState next = state;
  next.scheduled_.push_back(action);
  next.free_[action] = 0;
  return next;
}

std::vector<bool> mask(const ScheduleState& state) {
  std::vector<bool> out(state.jobs());
  for (int j = 0; j < state.jobs(); ++j) out[j] = state.is_unscheduled(j);
  return out;
}

ScheduleState ExpertTrace::state_at(int t) const {
  if (t < 0 || t > length()) throw ValidationError("trace step out of range");
  ScheduleState s(length());
  for (int i = 0; i < t; ++i) s = step(s, actions[i]);
  return s;
}

Expert neh_expert() {
  return [](const Instance& inst) { return neh(inst).perm; };
}

void validate_trace(const ExpertTrace& trace, int jobs) {
  if (!is_permutation_of(trace.actions, jobs))
    throw DataError("trace for instance " + std::to_string(trace.instance_id) + " is not a permutation of " +
                    std::to_string(jobs) + " jobs");
}

std::vector<ExpertTrace> record_expert_traces(const std::vector<Instance>& instances, const Expert& expert) {
  std::vector<ExpertTrace> out;
  out.reserve(instances.size());
  for (size_t i = 0; i < instances.size(); ++i) {
    ExpertTrace tr{static_cast<int>(i), expert(instances[i])};
    validate_trace(tr, instances[i].jobs());
    out.push_back(std::move(tr));
  }
  return out;
}

void save_traces(const std::filesystem::path& path, const TraceFile& file) {
  nlohmann::json header;
  header["kind"] = "pfss-traces";
  header["machines"] = file.machines;
  header["expert"] = file.expert;
  header["dataset"] = file.dataset;
  header["count"] = file.traces.size();
  auto& list = header["traces"] = nlohmann::json::array();
  std::vector<uint8_t> body;
  for (const auto& tr : file.traces) {
    list.push_back({{"instance", tr.instance_id}, {"jobs", tr.length()}});
    for (int a : tr.actions) container::append_u32(body, static_cast<uint32_t>(a));
  }
  container::write(path, "PFTR", kTraceVersion, std::move(header), body);
}

TraceFile load_traces(const std::filesystem::path& path) {
  const auto f = container::read(path, "PFTR", kTraceVersion);
  TraceFile out;
  out.machines = f.header.at("machines").get<int>();
  out.expert = f.header.value("expert", std::string{});
  out.dataset = f.header.value("dataset", std::string{});
  size_t offset = 0;
  for (const auto& meta : f.header.at("traces")) {
    ExpertTrace tr;
    tr.instance_id = meta.at("instance").get<int>();
    const int n = meta.at("jobs").get<int>();
    if (offset + 4 * static_cast<size_t>(n) > f.body.size()) throw DataError(path.string() + ": corrupt body");
    for (int t = 0; t < n; ++t) tr.actions.push_back(static_cast<int>(container::read_u32(f.body.data() + offset + 4 * t)));
    offset += 4 * static_cast<size_t>(n);
    validate_trace(tr, n);
    out.traces.push_back(std::move(tr));
  }
  if (offset != f.body.size()) throw DataError(path.string() + ": corrupt body (trailing bytes)");
  return out;
}

}  // namespace pfss
