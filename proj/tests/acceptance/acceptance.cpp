// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Criteria 6 to 8 share one trained checkpoint, written under the system temp
// directory. Pass a criterion number to run only that one (6 is then trained
// on demand for 7 and 8).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "../unit/gradcheck.hpp"
#include "../unit/helpers.hpp"
#include "../unit/taillard_lcg.hpp"
#include "pfss/container.hpp"
#include "pfss/errors.hpp"
#include "pfss/exact.hpp"
#include "pfss/harness.hpp"
#include "pfss/heuristics.hpp"
#include "pfss/instance_io.hpp"
#include "pfss/train.hpp"

using namespace pfss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const fs::path& work_dir() {
  static const fs::path dir = fs::temp_directory_path() / "pfss_acceptance";
  return dir;
}

// 1. Makespan oracle equivalence and brute-force dominance.
Outcome makespan_oracle() {
  std::mt19937_64 gen(101);
  const auto methods = {harness::make_method("neh"), harness::make_method("rs"), harness::make_method("ils"),
                        harness::make_method("ig")};
  long perms = 0, mismatches = 0, dominated = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + static_cast<int>(gen() % 8);
    const int m = k % 2 == 0 ? 2 : 5;
    const Instance inst = generate(DatasetSpec::gamma(1, n, m, 1000 + k)).front();
    Permutation p = identity_permutation(n);
    do {
      ++perms;
      if (makespan(inst, p) != testing::recurrence_makespan(inst, p)) ++mismatches;
    } while (std::next_permutation(p.begin(), p.end()));
    const double opt = brute_force(inst).makespan;
    for (const auto& meth : methods)
      if (makespan(inst, meth.solve(inst, k)) < opt) ++dominated;
  }
  return {mismatches == 0 && dominated == 0,
          fmt("%ld permutations checked, %ld mismatches, %ld heuristic results below the optimum", perms, mismatches,
              dominated)};
}

// 2. NEH near-optimality at n=8.
Outcome neh_near_optimal() {
  const auto insts = generate(DatasetSpec::gamma(100, 8, 5, 202));
  std::vector<double> gaps;
  for (const auto& inst : insts) gaps.push_back(gap_percent(neh(inst).makespan, brute_force(inst).makespan));
  const double g = mean(gaps);
  return {g <= 8.0, fmt("mean NEH gap to the optimum %.3f%% (limit 8%%), worst %.3f%%", g,
                        *std::max_element(gaps.begin(), gaps.end()))};
}

// 3. Heuristic ordering on 100 Gamma instances, three seeds.
Outcome heuristic_ordering() {
  const auto insts = generate(DatasetSpec::gamma(100, 20, 5, 303));
  harness::SolveOptions o;
  o.methods = {"neh", "ig", "ils", "rs"};
  o.seeds = 3;
  o.seed = 303;
  o.threads = threads();
  const Report r = harness::solve(insts, o);
  const double neh = r.find("neh")->makespan, ig = r.find("ig")->makespan, ils = r.find("ils")->makespan,
               rs = r.find("rs")->makespan;
  const ReportRow* rs_row = r.find("rs");
  const bool sig = rs_row->wilcoxon_p && *rs_row->wilcoxon_p < 0.05 && rs > neh;
  return {neh <= ig && ig <= ils && ils <= rs && sig,
          fmt("mean makespans NEH %.3f, IG %.3f, ILS %.3f, RS %.3f (gaps %.2f/%.2f/%.2f%%); RS vs NEH p=%.3g", neh,
              ig, ils, rs, r.find("ig")->gap_pct, r.find("ils")->gap_pct, rs_row->gap_pct,
              rs_row->wilcoxon_p.value_or(1.0))};
}

// 4. Finite-difference gradient check of the behaviour-cloning loss.
Outcome gradient_check() {
  double worst = 0.0;
  std::string worst_name;
  int tensors = 0;
  for (auto norm : {Normalization::kBatch, Normalization::kLayer}) {
    PolicyConfig c;
    c.machines = 2;
    c.dim = 4;
    c.layers = 1;
    c.heads = 2;
    c.normalization = norm;
    PolicyParams p = PolicyParams::init(c, 404);
    const auto insts = generate(DatasetSpec::gamma(2, 3, 2, 404));
    const auto traces = record_expert_traces(insts);
    const BcBatch batch{{&insts[0], &insts[1]}, {&traces[0].actions, &traces[1].actions}};
    p.zero_grad();
    bc_loss(p, batch, Mode::kTrain, true);
    PolicyParams probe = p;
    probe.for_each([&](ad::Parameter& w) {
      const ad::Mat fd =
          testing::numeric_gradient(w, [&] { return bc_loss(probe, batch, Mode::kTrain, false).loss; }, 1e-6);
      const double err = testing::relative_error(w.grad, fd);
      ++tensors;
      if (err > worst) {
        worst = err;
        worst_name = to_string(norm) + " norm, " + w.name;
      }
    });
  }
  return {worst < 1e-4, fmt("%d tensors, worst relative error %.2e (%s)", tensors, worst,
                            worst_name.empty() ? "none" : worst_name.c_str())};
}

// 5. Masking and probability invariants over random decode steps.
Outcome masking_invariants() {
  std::mt19937_64 gen(505);
  long steps = 0, mass_errors = 0, clip_errors = 0;
  double worst_sum = 0.0;
  int policies = 0;
  while (steps < 100000) {
    PolicyConfig c;
    c.machines = 2 + static_cast<int>(gen() % 5);
    c.dim = 8 * (1 + static_cast<int>(gen() % 2));
    c.layers = 1 + static_cast<int>(gen() % 3);
    c.heads = 2;
    c.normalization = static_cast<Normalization>(gen() % 3);
    PolicyParams p = PolicyParams::init(c, gen());
    // Every other policy gets saturating pointer weights.
    if (policies++ % 2 == 1) p.W_Q.value *= 100.0;
    for (int rep = 0; rep < 20 && steps < 100000; ++rep) {
      const int n = 2 + static_cast<int>(gen() % 40);
      DatasetSpec spec = DatasetSpec::gamma(1, n, c.machines, gen());
      const Instance inst = generate(spec).front();
      const DecoderCache dec(p, encode(p, inst));
      ScheduleState s = reset(inst);
      for (int a : testing::random_perm(gen, n)) {
        const auto u = dec.logits(s);
        const auto probs = dec.probabilities(s);
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
          if (!s.is_unscheduled(j)) {
            if (probs[j] != 0.0) ++mass_errors;
          } else {
            total += probs[j];
            if (!(u[j] >= -10.0 && u[j] <= 10.0)) ++clip_errors;
          }
        }
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        if (std::abs(total - 1.0) > 1e-12) ++mass_errors;
        s = step(s, a);
        ++steps;
      }
    }
  }
  return {mass_errors == 0 && clip_errors == 0,
          fmt("%ld decode steps over %d policies; %ld mass violations (worst |sum-1| %.1e), %ld logits outside "
              "[-10, 10]",
              steps, policies, mass_errors, worst_sum, clip_errors)};
}

// 6. Behaviour cloning at desk scale.
std::optional<fs::path> trained_checkpoint;

Outcome behaviour_cloning() {
  const auto train_set = generate(DatasetSpec::gamma(2000, 20, 5, 11));
  const auto val_set = generate(DatasetSpec::gamma(200, 20, 5, 22));
  const auto traces = record_expert_traces(train_set);
  PolicyConfig pc;  // d=128, L=3, 8 heads, batch norm, mean aggregation
  pc.machines = 5;
  TrainConfig tc;  // batch 128, lr 1e-4, decay 0.96
  tc.epochs = 20;
  tc.seed = 1;
  tc.checkpoint_every = 0;
  tc.out_dir = work_dir() / "bc";
  tc.eval_threads = threads();
  std::ostringstream log;
  const TrainResult r = train(tc, PolicyParams::init(pc, 1), train_set, traces, val_set, &log);
  trained_checkpoint = tc.out_dir / "policy.pfck";
  const auto& last = r.log.back();
  const auto& first = r.log.front();
  return {last.val_gap <= 8.0,
          fmt("validation gap vs NEH %.3f%% after %d epochs (limit 8%%; epoch 1: %.2f%%), train loss %.3f -> %.3f, "
              "%.0f s",
              last.val_gap, last.epoch, first.val_gap, first.train_loss, last.train_loss, last.elapsed_s)};
}

const fs::path& checkpoint() {
  if (!trained_checkpoint) behaviour_cloning();
  return *trained_checkpoint;
}

// 7. Size generalization to n=100.
Outcome size_generalization() {
  const std::string pol = "policy:" + checkpoint().string();
  const auto insts = generate(DatasetSpec::gamma(50, 100, 5, 707));
  const Checkpoint ck = load_checkpoint(checkpoint());
  int invalid = 0;
  for (const auto& inst : insts) {
    try {
      validate_permutation(rollout_greedy(ck.params, inst), 100);
    } catch (const ValidationError&) {
      ++invalid;
    }
  }
  harness::SolveOptions o;
  o.methods = {pol, "rs"};
  o.seeds = 1;
  o.seed = 707;
  o.params.rs_samples = 10000;
  o.threads = threads();
  const Report r = harness::solve(insts, o);
  const double g_pol = r.find(pol)->gap_pct, g_rs = r.find("rs")->gap_pct;
  return {invalid == 0 && g_pol < g_rs,
          fmt("n=100: policy gap %.3f%% vs random search (10000 samples) %.3f%%; %d invalid permutations", g_pol, g_rs,
              invalid)};
}

// 8. Sigma sweep: at sigma 0 the policy ties the expert.
Outcome sigma_zero() {
  const std::string pol = "policy:" + checkpoint().string();
  harness::SigmaSweepOptions o;
  o.sigmas = {0, 2, 4, 6};
  o.count = 100;
  o.jobs = 20;
  o.machines = 5;
  o.method_a = pol;
  o.method_b = "rs";
  o.base.seeds = 1;
  o.base.seed = 808;
  o.base.threads = threads();
  const Report r = harness::sweep_sigma(o);
  const double g0 = r.find(pol, "sigma=0")->gap_pct;
  std::string rest;
  for (const char* g : {"sigma=2", "sigma=4", "sigma=6"})
    rest += fmt(" %s: %.2f%% (rs %.2f%%)", g, r.find(pol, g)->gap_pct, r.find("rs", g)->gap_pct);
  return {g0 == 0.0, fmt("policy gap at sigma=0 is %.17g;%s", g0, rest.c_str())};
}

// 9. MIP embedding soundness and perturbation detection.
Outcome mip_soundness() {
  std::mt19937_64 gen(909);
  int accepted = 0, perturbations = 0, missed = 0;
  const double eps = 10 * kMipTolerance;
  auto has = [](const std::vector<MipViolation>& v, MipTag tag) {
    return std::any_of(v.begin(), v.end(), [tag](const MipViolation& x) { return x.tag == tag; });
  };
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + static_cast<int>(gen() % 5);
    const int m = 1 + static_cast<int>(gen() % 4);
    const Instance inst = generate(DatasetSpec::gamma(1, n, m, 900 + k)).front();
    const SolveResult opt = brute_force(inst);
    const MipSolution good = embed_permutation(inst, opt.perm);
    if (check_mip_solution(inst, good.y, good.z, good.cmax) && good.cmax == makespan(inst, opt.perm)) ++accepted;

    auto expect = [&](const MipSolution& s, std::optional<MipTag> tag) {
      ++perturbations;
      const auto v = mip_violations(inst, s);
      if (v.empty() || (tag && !has(v, *tag))) ++missed;
    };
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        auto s = good;
        s.y[i][j] -= eps;
        expect(s, std::nullopt);
      }
    auto s = good;
    s.cmax -= eps;
    expect(s, MipTag::kMakespan);
    // Drop the arc leaving the first job.
    const int first = opt.perm.front() + 1, second = opt.perm[1] + 1;
    s = good;
    s.z[first][second] = 0.0;
    expect(s, MipTag::kSuccessor);
    // A second predecessor for the second job.
    s = good;
    s.z[0][second] = 1.0;
    expect(s, MipTag::kPredecessor);
    s = good;
    s.z[first][second] = 0.5;
    expect(s, MipTag::kBinary);
    s = good;
    s.y[0][opt.perm.front()] = -eps;
    expect(s, MipTag::kNonNegative);
    // Sequence the first two jobs the other way round without moving them.
    Permutation swapped = opt.perm;
    std::swap(swapped[0], swapped[1]);
    s = good;
    s.z = embed_permutation(inst, swapped).z;
    expect(s, MipTag::kPrecedence);
  }
  return {accepted == 50 && missed == 0,
          fmt("%d/50 optimal embeddings accepted; %d of %d perturbations went undetected", accepted, missed,
              perturbations)};
}

// 10. Benchmark fixtures.
Outcome benchmark_ingestion() {
  const fs::path dir = PFSS_TEST_DATA;
  const auto ta = parse_taillard(read_text_file(dir / "ta001.txt"));
  const auto vrf = parse_vrf(read_text_file(dir / "vrf_10_5_synthetic.txt"));
  auto matrix_hash = [](const Instance& inst) {
    return container::fnv1a64(reinterpret_cast<const uint8_t*>(inst.times().data()), inst.times().size() * 8);
  };
  auto lcg_instance = [](uint64_t seed, int n, int m) {
    std::vector<double> t;
    for (const auto& row : testing::taillard_matrix(static_cast<int64_t>(seed), n, m))
      for (int v : row) t.push_back(v);
    return Instance(m, n, std::move(t));
  };
  bool shapes = ta.size() == 1 && vrf.size() == 1 && ta[0].jobs() == 20 && ta[0].machines() == 5 &&
                vrf[0].jobs() == 10 && vrf[0].machines() == 5;
  const bool sums = shapes && matrix_hash(ta[0]) == matrix_hash(lcg_instance(873654221, 20, 5)) &&
                    matrix_hash(vrf[0]) == matrix_hash(lcg_instance(20150101, 10, 5));
  std::string detail;
  bool gaps = true;
  for (const auto* set : {&ta, &vrf}) {
    harness::SolveOptions o;
    o.methods = {"neh"};
    o.seeds = 1;
    const Report r = harness::solve(*set, o);
    gaps = gaps && r.rows.size() == 1 && r.rows[0].gap_pct == 0.0;
    detail += fmt(" NEH %dx%d makespan %.0f gap %.1f%%;", r.rows[0].n, r.rows[0].m, r.rows[0].makespan,
                  r.rows[0].gap_pct);
  }
  return {shapes && sums && gaps,
          fmt("shapes %s, matrix hashes %s;%s", shapes ? "ok" : "WRONG", sums ? "match" : "DIFFER", detail.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"makespan oracle equivalence", makespan_oracle},
      {"NEH near-optimality at n=8", neh_near_optimal},
      {"heuristic ordering at n=20", heuristic_ordering},
      {"policy gradient check", gradient_check},
      {"masking and probability invariants", masking_invariants},
      {"desk-scale behaviour cloning", behaviour_cloning},
      {"size generalization to n=100", size_generalization},
      {"sigma=0 ties the expert", sigma_zero},
      {"MIP embedding soundness", mip_soundness},
      {"benchmark ingestion", benchmark_ingestion},
  };
  std::optional<int> only;
  if (argc > 1) only = std::stoi(argv[1]);
  fs::create_directories(work_dir());

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && *only != id) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failed;
    std::printf("criterion %2d %s: %s [%s] (%.1f s)\n", id, out.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}
