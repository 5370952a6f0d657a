// pfss: command-line front end for datasets, solvers, training and reports.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "pfss/errors.hpp"
#include "pfss/exact.hpp"
#include "pfss/harness.hpp"
#include "pfss/heuristics.hpp"
#include "pfss/instance_io.hpp"
#include "pfss/mdp.hpp"
#include "pfss/report.hpp"
#include "pfss/train.hpp"

namespace {

using namespace pfss;

struct Global {
  uint64_t seed = 0;
  std::string out;
  int parallel = 0;  // 0: sequential
};

struct InputArgs {
  std::string data;
  std::string taillard;
  std::string vrf;

  void add_to(CLI::App* cmd) {
    auto* d = cmd->add_option("--data", data, "dataset file written by `pfss generate`");
    auto* t = cmd->add_option("--taillard", taillard, "Taillard benchmark text file");
    auto* v = cmd->add_option("--vrf", vrf, "VRF benchmark text file");
    d->excludes(t)->excludes(v);
    t->excludes(v);
  }

  std::vector<Instance> load() const {
    if (!data.empty()) return load_dataset(data);
    if (!taillard.empty()) return parse_taillard(read_text_file(taillard));
    if (!vrf.empty()) return parse_vrf(read_text_file(vrf));
    throw ValidationError("one of --data, --taillard or --vrf is required");
  }
};

int threads_for(const Global& g) {
  if (g.parallel <= 0) return 1;
  return g.parallel;
}

void print_report(const Report& r) {
  std::printf("%-28s %5s %4s %12s %9s %10s  %s\n", "method", "n", "m", "makespan", "gap_pct", "time_s", "group");
  for (const auto& row : r.rows) {
    std::string sig;
    if (row.wilcoxon_p) sig = row.significant ? "  *" : "";
    std::printf("%-28s %5d %4d %12.4f %9.4f %10.4f  %s%s\n", row.method.c_str(), row.n, row.m, row.makespan,
                row.gap_pct, row.time_s, row.group.c_str(), sig.c_str());
  }
}

void emit_report(const Global& g, const Report& r) {
  print_report(r);
  if (!g.out.empty()) write_report(g.out, r);
}

void require_out(const Global& g, const char* what) {
  if (g.out.empty()) throw ValidationError(std::string("--out is required for ") + what);
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    size_t start = 0;
    while (start <= item.size()) {
      const size_t comma = item.find(',', start);
      const std::string part = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!part.empty()) out.push_back(part);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

void add_method_params(CLI::App* cmd, harness::MethodParams& p) {
  cmd->add_option("--rs-samples", p.rs_samples, "random-search samples per instance")->capture_default_str();
  cmd->add_option("--rs-time", p.rs_time_s, "random-search time per instance in seconds (replaces samples)");
  cmd->add_option("--ils-iterations", p.ils_iterations, "iterated local search iterations")->capture_default_str();
  cmd->add_option("--ils-passes", p.ils_passes, "insertion passes per local search (0: to a local optimum)")
      ->capture_default_str();
  cmd->add_option("--ils-strength", p.ils_strength, "pairwise swaps per perturbation")->capture_default_str();
  cmd->add_option("--ig-iterations", p.ig_iterations, "iterated greedy iterations")->capture_default_str();
  cmd->add_option("--ig-passes", p.ig_passes, "insertion passes per local search (0: to a local optimum)")
      ->capture_default_str();
  cmd->add_option("--ig-d", p.ig_destruction, "jobs removed per destruction")->capture_default_str();
  cmd->add_option("--ig-temperature", p.ig_temperature, "acceptance temperature (negative: mean time / 10)")
      ->capture_default_str();
}

void add_policy_config(CLI::App* cmd, PolicyConfig& c, std::string& agg, std::string& norm) {
  cmd->add_option("--dim", c.dim, "embedding width d")->capture_default_str();
  cmd->add_option("--layers", c.layers, "encoder layers L")->capture_default_str();
  cmd->add_option("--heads", c.heads, "attention heads")->capture_default_str();
  cmd->add_option("--clip", c.clip, "logit clip r")->capture_default_str();
  cmd->add_option("--rho", c.rho, "neighbour fraction")->capture_default_str();
  cmd->add_option("--aggregation", agg, "mean, sum or max")->capture_default_str();
  cmd->add_option("--norm", norm, "batch, layer or none")->capture_default_str();
  cmd->add_flag("--dense", c.dense_graph, "aggregate over all jobs instead of the nearest neighbours");
  cmd->add_flag("--scale-inputs", c.scale_inputs, "divide each instance by its largest processing time");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation flow-shop scheduling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value configuration file; [section] names select subcommands");
  Global g;
  app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
  app.add_option("--out", g.out, "output path");
  app.add_option("--parallel", g.parallel, "solve instances on this many threads (timings overlap)")
      ->expected(0, 1)
      ->default_str(std::to_string(std::max(1u, std::thread::hardware_concurrency())));

  // generate
  auto* gen = app.add_subcommand("generate", "draw a random dataset");
  std::string dist = "gamma";
  DatasetSpec spec;
  spec.count = 100;
  gen->add_option("--dist", dist, "gamma or normal")->check(CLI::IsMember({"gamma", "normal"}))->capture_default_str();
  gen->add_option("--n", spec.jobs, "jobs")->capture_default_str();
  gen->add_option("--m", spec.machines, "machines")->capture_default_str();
  gen->add_option("--count", spec.count, "instances")->capture_default_str();
  gen->add_option("--shape", spec.gamma_shape, "gamma shape k")->capture_default_str();
  gen->add_option("--scale", spec.gamma_scale, "gamma scale theta")->capture_default_str();
  gen->add_option("--mean", spec.normal_mean, "normal mean")->capture_default_str();
  gen->add_option("--sigma", spec.normal_stddev, "normal standard deviation")->capture_default_str();

  // solve
  auto* solve = app.add_subcommand("solve", "run methods on a dataset and report makespans and gaps");
  InputArgs solve_in;
  solve_in.add_to(solve);
  harness::SolveOptions solve_opts;
  std::vector<std::string> solve_methods{"neh"};
  solve->add_option("--methods", solve_methods, "comma-separated: neh, rs, ils, ig, brute-force, policy:<file>")
      ->capture_default_str();
  solve->add_option("--seeds", solve_opts.seeds, "trials per method")->capture_default_str();
  solve->add_option("--expert", solve_opts.expert, "reference method for gaps")->capture_default_str();
  add_method_params(solve, solve_opts.params);

  // record-traces
  auto* traces_cmd = app.add_subcommand("record-traces", "record NEH action sequences for behaviour cloning");
  InputArgs traces_in;
  traces_in.add_to(traces_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "behaviour cloning on NEH traces");
  std::string train_data, train_traces, val_data;
  TrainConfig tc;
  PolicyConfig pc;
  std::string agg = "mean", norm = "batch";
  train_cmd->add_option("--data", train_data, "training instances")->required();
  train_cmd->add_option("--traces", train_traces, "recorded traces (default: record NEH on --data)");
  train_cmd->add_option("--val", val_data, "validation instances for the per-epoch gap");
  train_cmd->add_option("--epochs", tc.epochs, "epochs")->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size, "instances per minibatch")->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate, "initial learning rate")->capture_default_str();
  train_cmd->add_option("--decay", tc.decay, "learning-rate factor per epoch")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tc.checkpoint_every, "epochs between checkpoints (0: final only)")
      ->capture_default_str();
  add_policy_config(train_cmd, pc, agg, norm);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "greedy rollout of a checkpoint on a dataset");
  std::string checkpoint;
  InputArgs eval_in;
  eval_in.add_to(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  std::string eval_expert = "neh";
  eval_cmd->add_option("--expert", eval_expert, "reference method for gaps")->capture_default_str();

  // sweep-sigma
  auto* sweep_s = app.add_subcommand("sweep-sigma", "compare two methods on Normal data across sigma");
  harness::SigmaSweepOptions sso;
  sweep_s->add_option("--a", sso.method_a, "first method or policy:<file>")->required();
  sweep_s->add_option("--b", sso.method_b, "second method or policy:<file>")->required();
  sweep_s->add_option("--sigmas", sso.sigmas, "standard deviations")->delimiter(',')->capture_default_str();
  sweep_s->add_option("--mean", sso.mean, "normal mean")->capture_default_str();
  sweep_s->add_option("--count", sso.count, "instances per sigma")->capture_default_str();
  sweep_s->add_option("--n", sso.jobs, "jobs")->capture_default_str();
  sweep_s->add_option("--m", sso.machines, "machines")->capture_default_str();
  sweep_s->add_option("--seeds", sso.base.seeds, "trials per method")->capture_default_str();
  add_method_params(sweep_s, sso.base.params);

  // sweep-machines
  auto* sweep_m = app.add_subcommand("sweep-machines", "run methods on Gamma data across machine counts");
  harness::MachineSweepOptions mso;
  std::vector<std::string> sweep_methods{"neh", "rs", "ils", "ig"};
  sweep_m->add_option("--machines", mso.machines, "machine counts")->delimiter(',')->capture_default_str();
  sweep_m->add_option("--methods", sweep_methods, "comma-separated methods")->capture_default_str();
  sweep_m->add_option("--count", mso.count, "instances per machine count")->capture_default_str();
  sweep_m->add_option("--n", mso.jobs, "jobs")->capture_default_str();
  sweep_m->add_option("--seeds", mso.base.seeds, "trials per method")->capture_default_str();
  add_method_params(sweep_m, mso.base.params);

  // export
  auto* exp = app.add_subcommand("export", "convert a report between JSON and CSV");
  std::string report_in, format = "csv";
  exp->add_option("--report", report_in, "report file (.json or .csv)")->required();
  exp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  // emit-mip
  auto* mip = app.add_subcommand("emit-mip", "write the mixed-integer model of one instance in LP format");
  InputArgs mip_in;
  mip_in.add_to(mip);
  int mip_index = 0;
  mip->add_option("--index", mip_index, "instance index within the input")->capture_default_str();

  // brute-force
  auto* bf = app.add_subcommand("brute-force", "exact optimum by enumeration (at most 10 jobs)");
  InputArgs bf_in;
  bf_in.add_to(bf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (app.count("--parallel") && g.parallel == 0) g.parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  try {
    if (*gen) {
      require_out(g, "generate");
      spec.distribution = dist == "gamma" ? Distribution::kGamma : Distribution::kNormal;
      spec.seed = g.seed;
      save_dataset(g.out, generate(spec), spec);
      std::printf("wrote %d instances (%d jobs, %d machines) to %s\n", spec.count, spec.jobs, spec.machines,
                  g.out.c_str());
    } else if (*solve) {
      solve_opts.methods = split_list(solve_methods);
      solve_opts.seed = g.seed;
      solve_opts.threads = threads_for(g);
      emit_report(g, harness::solve(solve_in.load(), solve_opts));
    } else if (*traces_cmd) {
      require_out(g, "record-traces");
      const auto instances = traces_in.load();
      if (instances.empty()) throw DataError("the dataset is empty");
      TraceFile tf{instances.front().machines(), "neh", traces_in.data, record_expert_traces(instances)};
      save_traces(g.out, tf);
      std::printf("wrote %zu traces to %s\n", tf.traces.size(), g.out.c_str());
    } else if (*train_cmd) {
      require_out(g, "train (checkpoint directory)");
      const auto instances = load_dataset(train_data);
      if (instances.empty()) throw DataError("the training set is empty");
      std::vector<ExpertTrace> traces =
          train_traces.empty() ? record_expert_traces(instances) : load_traces(train_traces).traces;
      const std::vector<Instance> val = val_data.empty() ? std::vector<Instance>{} : load_dataset(val_data);
      pc.machines = instances.front().machines();
      pc.aggregation = parse_aggregation(agg);
      pc.normalization = parse_normalization(norm);
      tc.seed = g.seed;
      tc.out_dir = g.out;
      tc.eval_threads = threads_for(g);
      train(tc, PolicyParams::init(pc, g.seed), instances, traces, val, &std::cout);
      std::printf("final checkpoint: %s\n", (std::filesystem::path(g.out) / "policy.pfck").c_str());
    } else if (*eval_cmd) {
      harness::SolveOptions so;
      so.methods = {"policy:" + checkpoint};
      so.seeds = 1;
      so.seed = g.seed;
      so.expert = eval_expert;
      so.threads = threads_for(g);
      emit_report(g, harness::solve(eval_in.load(), so));
    } else if (*sweep_s) {
      sso.base.seed = g.seed;
      sso.base.threads = threads_for(g);
      emit_report(g, harness::sweep_sigma(sso));
    } else if (*sweep_m) {
      mso.base.methods = split_list(sweep_methods);
      mso.base.seed = g.seed;
      mso.base.threads = threads_for(g);
      emit_report(g, harness::sweep_machines(mso));
    } else if (*exp) {
      const Report r = read_report(report_in);
      if (g.out.empty()) {
        std::cout << (format == "csv" ? to_csv(r) : to_json(r).dump(2) + "\n");
      } else {
        write_report(g.out, r, format == "csv" ? ReportFormat::kCsv : ReportFormat::kJson);
      }
    } else if (*mip) {
      const auto instances = mip_in.load();
      if (mip_index < 0 || mip_index >= static_cast<int>(instances.size()))
        throw ValidationError("--index out of range (dataset has " + std::to_string(instances.size()) + " instances)");
      const std::string lp = emit_mip(instances[mip_index]);
      if (g.out.empty()) {
        std::cout << lp;
      } else {
        std::ofstream(g.out) << lp;
      }
    } else if (*bf) {
      harness::SolveOptions so;
      so.methods = {"brute-force", "neh"};
      so.seeds = 1;
      so.expert = "brute-force";
      so.threads = threads_for(g);
      emit_report(g, harness::solve(bf_in.load(), so));
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  }
  return 0;
}
