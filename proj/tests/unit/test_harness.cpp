#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pfss/errors.hpp"
#include "pfss/harness.hpp"
#include "pfss/heuristics.hpp"
#include "pfss/instance_io.hpp"

using namespace pfss;
namespace fs = std::filesystem;

namespace {

harness::SolveOptions options(std::vector<std::string> methods, int seeds = 2) {
  harness::SolveOptions o;
  o.methods = std::move(methods);
  o.seeds = seeds;
  o.seed = 17;
  return o;
}

std::vector<double> expert_of(const Report& r, const std::string& group = {}) {
  return r.metadata.at("expert_makespans").at(group).get<std::vector<double>>();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const char* name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(PFSS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("method registry") {
  std::vector<std::string> plain;
  for (const auto& name : harness::known_methods())
    if (!name.starts_with("policy:")) plain.push_back(name);
  CHECK(plain.size() == 5);
  for (const auto& name : plain) CHECK(harness::make_method(name).name == name);
  CHECK_THROWS_AS(harness::make_method("simulated-annealing"), ValidationError);
  CHECK_THROWS_AS(harness::make_method("policy:/no/such/file.pfck"), DataError);
  const Instance inst = generate(DatasetSpec::gamma(1, 7, 3, 1)).front();
  for (const auto& name : plain) {
    const Permutation p = harness::make_method(name).solve(inst, 5);
    CHECK_NOTHROW(validate_permutation(p, 7));
  }
  CHECK(harness::make_method("neh").solve(inst, 1) == neh(inst).perm);
}

TEST_CASE("the expert alone has zero gap") {
  const auto insts = generate(DatasetSpec::gamma(8, 10, 4, 2));
  const Report r = harness::solve(insts, options({"neh"}, 3));
  REQUIRE(r.rows.size() == 1);
  const ReportRow& row = r.rows[0];
  CHECK(row.method == "neh");
  CHECK(row.gap_pct == 0.0);
  CHECK(row.n == 10);
  CHECK(row.m == 4);
  CHECK(row.seeds.size() == 3);
  CHECK_FALSE(row.wilcoxon_p.has_value());
  for (const auto& sd : row.seeds) {
    CHECK(sd.makespans == expert_of(r));
    CHECK(sd.gap_pct == 0.0);
  }
}

TEST_CASE("rows are recomputable from their per-seed detail") {
  const auto insts = generate(DatasetSpec::gamma(12, 9, 3, 3));
  const Report r = harness::solve(insts, options({"rs", "ils", "ig"}, 3));
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].method == "neh");  // the expert is added first when not requested
  const auto expert = expert_of(r);
  for (size_t i = 0; i < insts.size(); ++i) CHECK(expert[i] == neh(insts[i]).makespan);
  for (const auto& row : r.rows) {
    double ms = 0, gap = 0, time = 0;
    for (const auto& sd : row.seeds) {
      double seed_gap = 0;
      for (size_t i = 0; i < insts.size(); ++i) seed_gap += 100.0 * (sd.makespans[i] - expert[i]) / expert[i];
      CHECK(sd.gap_pct == doctest::Approx(seed_gap / insts.size()).epsilon(1e-12));
      ms += sd.makespan / row.seeds.size();
      gap += sd.gap_pct / row.seeds.size();
      time += sd.time_s / row.seeds.size();
    }
    CHECK(row.makespan == doctest::Approx(ms).epsilon(1e-12));
    CHECK(row.gap_pct == doctest::Approx(gap).epsilon(1e-12));
    CHECK(row.time_s == doctest::Approx(time).epsilon(1e-12));
  }
  CHECK_FALSE(r.find("neh")->wilcoxon_p.has_value());
  REQUIRE(r.find("rs")->wilcoxon_p.has_value());
  CHECK(r.find("rs")->gap_pct > 0.0);
  CHECK(r.find("rs")->significant);
  CHECK(r.find("rs")->gap_pct > r.find("ils")->gap_pct);

  SUBCASE("same seed, same makespans; another seed moves random search") {
    const Report again = harness::solve(insts, options({"rs", "ils", "ig"}, 3));
    for (size_t k = 0; k < r.rows.size(); ++k)
      for (size_t s = 0; s < 3; ++s) CHECK(again.rows[k].seeds[s].makespans == r.rows[k].seeds[s].makespans);
    auto other = options({"rs"}, 3);
    other.seed = 18;
    CHECK(harness::solve(insts, other).find("rs")->seeds[0].makespans != r.find("rs")->seeds[0].makespans);
  }
  SUBCASE("parallel solving gives the same makespans") {
    auto par = options({"rs", "ils", "ig"}, 3);
    par.threads = 3;
    const Report p = harness::solve(insts, par);
    for (size_t k = 0; k < r.rows.size(); ++k) CHECK(p.rows[k].makespan == r.rows[k].makespan);
    CHECK(p.metadata["parallel"] == true);
  }
}

TEST_CASE("solve options and inputs") {
  const auto insts = generate(DatasetSpec::gamma(3, 6, 3, 4));
  CHECK_THROWS_AS(harness::solve(insts, options({})), ValidationError);
  CHECK_THROWS_AS(harness::solve(insts, options({"neh"}, 0)), ValidationError);
  CHECK_THROWS_AS(harness::solve(insts, options({"tabu"})), ValidationError);
  CHECK_THROWS_AS(harness::solve({}, options({"neh"})), DataError);
  auto random_expert = options({"neh"});
  random_expert.expert = "rs";
  CHECK_THROWS_AS(harness::solve(generate(DatasetSpec::gamma(6, 8, 3, 4)), random_expert), ValidationError);
  // Too few instances for a signed-rank test: the row carries no p-value.
  const Report r = harness::solve(insts, options({"rs"}));
  CHECK_FALSE(r.find("rs")->wilcoxon_p.has_value());
}

TEST_CASE("exact expert") {
  const auto insts = generate(DatasetSpec::gamma(6, 7, 3, 5));
  auto o = options({"neh", "ig"}, 1);
  o.expert = "brute-force";
  const Report r = harness::solve(insts, o);
  CHECK(r.find("brute-force")->gap_pct == 0.0);
  CHECK(r.find("neh")->gap_pct >= 0.0);
  CHECK(r.find("ig")->gap_pct >= 0.0);
}

TEST_CASE("random search honours a time budget") {
  const auto insts = generate(DatasetSpec::gamma(5, 20, 5, 6));
  auto o = options({"rs"}, 1);
  o.params.rs_time_s = 0.05;
  const Report r = harness::solve(insts, o);
  const double budget = 0.05 * insts.size();
  CHECK(r.find("rs")->time_s >= 0.8 * budget);
  CHECK(r.find("rs")->time_s <= 1.2 * budget);
}

TEST_CASE("sigma sweep") {
  harness::SigmaSweepOptions o;
  o.count = 8;
  o.jobs = 8;
  o.machines = 3;
  o.method_a = "rs";
  o.method_b = "ils";
  o.base.seeds = 1;
  const Report r = harness::sweep_sigma(o);
  std::set<std::string> groups;
  for (const auto& row : r.rows) groups.insert(row.group);
  CHECK(groups == std::set<std::string>{"sigma=0", "sigma=2", "sigma=4", "sigma=6"});
  // With sigma 0 every job is the same, so every order ties.
  for (const char* m : {"rs", "ils", "neh"}) {
    const ReportRow* row = r.find(m, "sigma=0");
    REQUIRE(row != nullptr);
    CHECK(row->gap_pct == 0.0);
    CHECK(row->makespan == r.find("neh", "sigma=0")->makespan);
  }
  CHECK(r.find("rs", "sigma=6")->gap_pct > 0.0);
  CHECK(expert_of(r, "sigma=4").size() == 8);
  CHECK(r.metadata["sweep"]["kind"] == "sigma");

  harness::SigmaSweepOptions bad = o;
  bad.method_b.clear();
  CHECK_THROWS_AS(harness::sweep_sigma(bad), ValidationError);
}

TEST_CASE("machine sweep skips policies with another machine count") {
  Scratch tmp("pfss_harness_sweep");
  PolicyConfig c;
  c.machines = 3;
  c.dim = 8;
  c.layers = 1;
  c.heads = 2;
  save_checkpoint(tmp / "p3.pfck", Checkpoint{PolicyParams::init(c, 1)});
  harness::MachineSweepOptions o;
  o.machines = {3, 4};
  o.count = 6;
  o.jobs = 7;
  o.base = options({"policy:" + (tmp / "p3.pfck"), "rs"}, 1);
  const Report r = harness::sweep_machines(o);
  const std::string pol = "policy:" + (tmp / "p3.pfck");
  CHECK(r.find(pol, "m=3") != nullptr);
  CHECK(r.find(pol, "m=4") == nullptr);
  CHECK(r.find("rs", "m=4") != nullptr);
  CHECK(r.find("neh", "m=4")->m == 4);
  CHECK_THROWS_AS(harness::solve(generate(DatasetSpec::gamma(2, 5, 4, 1)), options({pol})), DataError);
}

TEST_CASE("append merges expert makespans by group") {
  const auto a = harness::solve(generate(DatasetSpec::gamma(3, 6, 3, 1)), [] {
    auto o = options({"neh"});
    o.group = "a";
    return o;
  }());
  auto b = harness::solve(generate(DatasetSpec::gamma(4, 6, 3, 2)), [] {
    auto o = options({"neh"});
    o.group = "b";
    return o;
  }());
  Report all = a;
  harness::append(all, b);
  CHECK(all.rows.size() == 2);
  CHECK(expert_of(all, "a").size() == 3);
  CHECK(expert_of(all, "b").size() == 4);
}

TEST_CASE("command-line tool") {
  Scratch tmp("pfss_cli_test");
  SUBCASE("generation is reproducible byte for byte") {
    REQUIRE(cli("generate --n 10 --m 4 --count 5 --seed 3 --out " + (tmp / "a.pfds")) == 0);
    REQUIRE(cli("generate --n 10 --m 4 --count 5 --seed 3 --out " + (tmp / "b.pfds")) == 0);
    REQUIRE(cli("generate --n 10 --m 4 --count 5 --seed 4 --out " + (tmp / "c.pfds")) == 0);
    CHECK(slurp(tmp / "a.pfds") == slurp(tmp / "b.pfds"));
    CHECK(slurp(tmp / "a.pfds") != slurp(tmp / "c.pfds"));
    const auto insts = load_dataset(tmp / "a.pfds");
    CHECK(insts.size() == 5);
    CHECK(insts[0].jobs() == 10);
  }
  SUBCASE("solve, export and exit codes") {
    REQUIRE(cli("generate --dist normal --sigma 2 --n 8 --m 3 --count 6 --out " + (tmp / "d.pfds")) == 0);
    REQUIRE(cli("solve --data " + (tmp / "d.pfds") + " --methods neh,rs --seeds 2 --out " + (tmp / "r.json")) == 0);
    const Report r = read_report(tmp / "r.json");
    CHECK(r.rows.size() == 2);
    CHECK(r.find("neh")->gap_pct == 0.0);
    REQUIRE(cli("export --report " + (tmp / "r.json") + " --format csv --out " + (tmp / "r.csv")) == 0);
    CHECK(slurp(tmp / "r.csv").starts_with("method,n,m,makespan,gap_pct,time_s,group\n"));
    CHECK(report_from_csv(slurp(tmp / "r.csv")).rows.size() == 2);

    CHECK(cli("solve --data " + (tmp / "d.pfds") + " --methods tabu") == 1);
    CHECK(cli("solve --data " + (tmp / "missing.pfds") + " --methods neh") == 2);
    CHECK(cli("solve --data " + (tmp / "d.pfds") + " --no-such-flag") == 1);
    CHECK(cli("frobnicate") == 1);
    CHECK(cli("generate --n 0 --out " + (tmp / "z.pfds")) == 1);
    std::ofstream(tmp / "junk.pfds") << "not a dataset";
    CHECK(cli("solve --data " + (tmp / "junk.pfds") + " --methods neh") == 2);
  }
  SUBCASE("configuration file") {
    std::ofstream(tmp / "run.ini") << "seed=9\n[generate]\nn=6\nm=2\ncount=3\n";
    REQUIRE(cli("--config " + (tmp / "run.ini") + " generate --out " + (tmp / "e.pfds")) == 0);
    REQUIRE(cli("generate --seed 9 --n 6 --m 2 --count 3 --out " + (tmp / "f.pfds")) == 0);
    CHECK(slurp(tmp / "e.pfds") == slurp(tmp / "f.pfds"));
  }
  SUBCASE("exact tools") {
    REQUIRE(cli("generate --n 6 --m 3 --count 2 --out " + (tmp / "g.pfds")) == 0);
    REQUIRE(cli("emit-mip --data " + (tmp / "g.pfds") + " --index 1 --out " + (tmp / "g.lp")) == 0);
    const std::string lp = slurp(tmp / "g.lp");
    CHECK(lp.find("Minimize") != std::string::npos);
    CHECK(lp.find("End") != std::string::npos);
    CHECK(cli("emit-mip --data " + (tmp / "g.pfds") + " --index 2") == 1);
    REQUIRE(cli("brute-force --data " + (tmp / "g.pfds") + " --out " + (tmp / "bf.json")) == 0);
    CHECK(read_report(tmp / "bf.json").find("brute-force")->gap_pct == 0.0);
    REQUIRE(cli("generate --n 11 --m 2 --count 1 --out " + (tmp / "h.pfds")) == 0);
    CHECK(cli("brute-force --data " + (tmp / "h.pfds")) == 1);
  }
  SUBCASE("training, evaluation and a numeric failure") {
    REQUIRE(cli("generate --n 6 --m 3 --count 16 --seed 1 --out " + (tmp / "t.pfds")) == 0);
    REQUIRE(cli("generate --n 6 --m 3 --count 4 --seed 2 --out " + (tmp / "v.pfds")) == 0);
    REQUIRE(cli("record-traces --data " + (tmp / "t.pfds") + " --out " + (tmp / "t.pftr")) == 0);
    REQUIRE(cli("train --data " + (tmp / "t.pfds") + " --traces " + (tmp / "t.pftr") + " --val " + (tmp / "v.pfds") +
                " --epochs 2 --batch 8 --dim 8 --layers 1 --heads 2 --out " + (tmp / "run")) == 0);
    CHECK(fs::exists(tmp.dir / "run" / "policy.pfck"));
    CHECK(fs::exists(tmp.dir / "run" / "epoch_2.pfck"));
    REQUIRE(cli("eval --data " + (tmp / "v.pfds") + " --checkpoint " + (tmp / "run/policy.pfck") + " --out " +
                (tmp / "ev.json")) == 0);
    CHECK(read_report(tmp / "ev.json").rows.size() == 2);

    // m=4 data against an m=3 policy.
    REQUIRE(cli("generate --n 6 --m 4 --count 2 --out " + (tmp / "w.pfds")) == 0);
    CHECK(cli("eval --data " + (tmp / "w.pfds") + " --checkpoint " + (tmp / "run/policy.pfck")) == 2);

    // Weights this large overflow double precision within four layers.
    PolicyConfig c;
    c.machines = 3;
    c.dim = 8;
    c.layers = 4;
    c.heads = 2;
    PolicyParams p = PolicyParams::init(c, 1);
    p.for_each([](ad::Parameter& w) { w.value.setConstant(1e38); });
    save_checkpoint(tmp / "huge.pfck", Checkpoint{p});
    CHECK(cli("eval --data " + (tmp / "v.pfds") + " --checkpoint " + (tmp / "huge.pfck")) == 3);
  }
}
