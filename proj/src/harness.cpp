#include "pfss/harness.hpp"

#include <chrono>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "pfss/errors.hpp"
#include "pfss/exact.hpp"
#include "pfss/heuristics.hpp"
#include "pfss/instance_io.hpp"
#include "pfss/rng.hpp"
#include "pfss/stats.hpp"

namespace pfss::harness {

namespace {

constexpr std::string_view kPolicyPrefix = "policy:";

template <typename Fn>
void for_instances(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int i = w; i < count; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> known_methods() { return {"neh", "rs", "ils", "ig", "brute-force", "policy:<checkpoint>"}; }

Method make_method(const std::string& name, const MethodParams& p) {
  if (name == "neh") return {name, [](const Instance& inst, uint64_t) { return neh(inst).perm; }};
  if (name == "brute-force") return {name, [](const Instance& inst, uint64_t) { return brute_force(inst).perm; }};
  if (name == "rs")
    return {name, [p](const Instance& inst, uint64_t seed) {
              HeuristicBudget b;
              b.seed = seed;
              if (p.rs_time_s)
                b.max_time_s = *p.rs_time_s;
              else
                b.max_iterations = p.rs_samples;
              return random_search(inst, b).perm;
            }};
  if (name == "ils")
    return {name, [p](const Instance& inst, uint64_t seed) {
              HeuristicBudget b;
              b.seed = seed;
              b.max_iterations = p.ils_iterations;
              return iterated_local_search(inst, b, p.ils_strength, p.ils_passes).perm;
            }};
  if (name == "ig")
    return {name, [p](const Instance& inst, uint64_t seed) {
              IgParams ig;
              ig.destruction_size = std::min(p.ig_destruction, std::max(1, inst.jobs() - 1));
              ig.temperature = p.ig_temperature;
              ig.ls_max_passes = p.ig_passes;
              ig.budget.seed = seed;
              ig.budget.max_iterations = p.ig_iterations;
              return iterated_greedy(inst, ig).perm;
            }};
  if (name.starts_with(kPolicyPrefix)) {
    const std::filesystem::path path = name.substr(kPolicyPrefix.size());
    auto params = std::make_shared<const PolicyParams>(load_checkpoint(path).params);
    return {name, [params](const Instance& inst, uint64_t) { return rollout_greedy(*params, inst); },
            params->config.machines};
  }
  throw ValidationError("unknown method '" + name + "' (known: neh, rs, ils, ig, brute-force, policy:<checkpoint>)");
}

void SolveOptions::validate() const {
  if (methods.empty()) throw ValidationError("at least one method is required");
  if (seeds < 1) throw ValidationError("seeds must be at least 1");
  if (threads < 1) throw ValidationError("threads must be at least 1");
}

Report solve(const std::vector<Instance>& instances, const SolveOptions& options) {
  options.validate();
  if (instances.empty()) throw DataError("the dataset is empty");
  const int count = static_cast<int>(instances.size());
  const int n = instances.front().jobs();
  const int m = instances.front().machines();

  std::vector<Method> methods;
  for (const auto& name : options.methods) methods.push_back(make_method(name, options.params));
  const Method expert = make_method(options.expert, options.params);
  for (const auto& meth : methods)
    if (meth.machines != 0)
      for (const auto& inst : instances)
        if (inst.machines() != meth.machines)
          throw DataError(meth.name + " was trained for " + std::to_string(meth.machines) +
                          " machines but the dataset has " + std::to_string(inst.machines()));

  std::vector<double> expert_ms(count);
  for_instances(count, options.threads,
                [&](int i) { expert_ms[i] = makespan(instances[i], expert.solve(instances[i], 0)); });

  Report report;
  report.metadata["expert"] = options.expert;
  report.metadata["seeds"] = options.seeds;
  report.metadata["base_seed"] = options.seed;
  report.metadata["instances"] = count;
  report.metadata["parallel"] = options.threads > 1;
  report.metadata["expert_makespans"][options.group] = expert_ms;

  auto names = options.methods;
  if (std::find(names.begin(), names.end(), options.expert) == names.end()) {
    names.insert(names.begin(), options.expert);
    methods.insert(methods.begin(), expert);
  }

  for (size_t k = 0; k < methods.size(); ++k) {
    const Method& meth = methods[k];
    const bool is_expert = names[k] == options.expert;
    ReportRow row;
    row.method = meth.name;
    row.n = n;
    row.m = m;
    row.group = options.group;
    std::vector<double> per_instance(count, 0.0);
    for (int s = 0; s < options.seeds; ++s) {
      SeedDetail sd;
      sd.seed = Rng::derive(options.seed, static_cast<uint64_t>(s));
      sd.makespans.assign(count, 0.0);
      std::vector<double> times(count), gaps(count);
      for_instances(count, options.threads, [&](int i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Permutation perm = meth.solve(instances[i], Rng::derive(sd.seed, static_cast<uint64_t>(i)));
        times[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sd.makespans[i] = makespan(instances[i], perm);
        gaps[i] = gap_percent(sd.makespans[i], expert_ms[i]);
      });
      if (is_expert && sd.makespans != expert_ms)
        throw ValidationError("expert method '" + meth.name + "' is not deterministic");
      sd.makespan = mean_of(sd.makespans);
      sd.gap_pct = mean_of(gaps);
      sd.time_s = std::accumulate(times.begin(), times.end(), 0.0);
      for (int i = 0; i < count; ++i) per_instance[i] += sd.makespans[i] / options.seeds;
      row.seeds.push_back(std::move(sd));
    }
    std::vector<double> seed_ms, seed_gap, seed_time;
    for (const auto& sd : row.seeds) {
      seed_ms.push_back(sd.makespan);
      seed_gap.push_back(sd.gap_pct);
      seed_time.push_back(sd.time_s);
    }
    row.makespan = mean_of(seed_ms);
    row.gap_pct = is_expert ? 0.0 : mean_of(seed_gap);
    row.time_s = mean_of(seed_time);
    if (!is_expert) {
      try {
        const auto w = wilcoxon_signed_rank(per_instance, expert_ms);
        row.wilcoxon_p = w.p_value;
        row.significant = w.significant;
      } catch (const ValidationError&) {
        // fewer than the minimum number of differing instances: no test
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void append(Report& into, Report part) {
  for (auto& row : part.rows) into.rows.push_back(std::move(row));
  for (auto& [key, value] : part.metadata.items()) {
    if (key == "expert_makespans") {
      for (auto& [g, v] : value.items()) into.metadata["expert_makespans"][g] = v;
    } else if (!into.metadata.contains(key)) {
      into.metadata[key] = value;
    }
  }
}

Report sweep_sigma(const SigmaSweepOptions& o) {
  if (o.sigmas.empty()) throw ValidationError("sigma list is empty");
  if (o.method_a.empty() || o.method_b.empty()) throw ValidationError("a sigma sweep compares two methods");
  Report report;
  for (size_t k = 0; k < o.sigmas.size(); ++k) {
    DatasetSpec spec = DatasetSpec::normal(o.count, o.jobs, o.machines, o.sigmas[k], o.base.seed);
    spec.normal_mean = o.mean;
    SolveOptions so = o.base;
    so.methods = {o.method_a};
    if (o.method_b != o.method_a) so.methods.push_back(o.method_b);
    so.group = "sigma=" + format_number(o.sigmas[k]);
    append(report, solve(generate(spec), so));
  }
  report.metadata["sweep"] = {{"kind", "sigma"}, {"mean", o.mean}, {"sigmas", o.sigmas}, {"a", o.method_a}, {"b", o.method_b}};
  return report;
}

Report sweep_machines(const MachineSweepOptions& o) {
  if (o.machines.empty()) throw ValidationError("machine list is empty");
  Report report;
  for (int m : o.machines) {
    SolveOptions so = o.base;
    so.methods.clear();
    for (const auto& name : o.base.methods) {
      if (name.starts_with(kPolicyPrefix) && make_method(name).machines != m) continue;
      so.methods.push_back(name);
    }
    if (so.methods.empty()) continue;
    so.group = "m=" + std::to_string(m);
    append(report, solve(generate(DatasetSpec::gamma(o.count, o.jobs, m, o.base.seed)), so));
  }
  report.metadata["sweep"] = {{"kind", "machines"}, {"machines", o.machines}};
  return report;
}

}  // namespace pfss::harness
