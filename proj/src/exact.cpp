#include "pfss/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pfss/errors.hpp"

namespace pfss {

namespace {

struct Enumerator {
  const Instance& inst;
  int m;
  int n;
  std::vector<std::vector<double>> fronts;  // fronts[depth] before placing position depth
  std::vector<double> remaining;            // unscheduled work per machine
  std::vector<char> used;
  Permutation prefix;
  Permutation best;
  double best_value;

  explicit Enumerator(const Instance& in)
      : inst(in), m(in.machines()), n(in.jobs()), fronts(n + 1, std::vector<double>(m, 0.0)),
        remaining(m, 0.0), used(n, 0), best_value(std::numeric_limits<double>::infinity()) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) remaining[i] += in.at(i, j);
  }

  // Jobs are tried in increasing index order so leaves appear in
  // lexicographic order; only strictly better leaves replace the incumbent.
  void run(int depth) {
    if (depth == n) {
      if (fronts[n][m - 1] < best_value) {
        best_value = fronts[n][m - 1];
        best = prefix;
      }
      return;
    }
    double bound = 0.0;
    for (int i = 0; i < m; ++i) bound = std::max(bound, fronts[depth][i] + remaining[i]);
    if (bound > best_value * (1.0 + 1e-12) + 1e-12) return;
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      prefix.push_back(j);
      fronts[depth + 1] = fronts[depth];
      front_advance_inplace(inst, fronts[depth + 1], j);
      for (int i = 0; i < m; ++i) remaining[i] -= inst.at(i, j);
      run(depth + 1);
      for (int i = 0; i < m; ++i) remaining[i] += inst.at(i, j);
      prefix.pop_back();
      used[j] = 0;
    }
  }
};

std::string y_name(int machine, int job) { return "y_" + std::to_string(machine + 1) + "_" + std::to_string(job + 1); }
// Extended job index: 0 is the dummy job, real job j is j + 1.
std::string z_name(int from, int to) { return "z_" + std::to_string(from) + "_" + std::to_string(to); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SolveResult brute_force(const Instance& inst) {
  if (inst.jobs() > kBruteForceMaxJobs)
    throw ValidationError("brute force is limited to " + std::to_string(kBruteForceMaxJobs) + " jobs (got " +
                          std::to_string(inst.jobs()) + ")");
  Enumerator e(inst);
  e.run(0);
  return SolveResult{e.best, e.best_value, {}};
}

size_t MipModel::count(MipTag tag) const {
  return static_cast<size_t>(
      std::count_if(constraints.begin(), constraints.end(), [tag](const MipConstraint& c) { return c.tag == tag; }));
}

MipModel build_mip(const Instance& inst) {
  const int m = inst.machines();
  const int n = inst.jobs();
  MipModel model;
  model.machines = m;
  model.jobs = n;
  model.big_m.assign(m + 1, 0.0);
  for (int i = 1; i <= m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += inst.at(i - 1, j);
    model.big_m[i] = model.big_m[i - 1] + s;
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) model.continuous.push_back(y_name(i, j));
  model.continuous.push_back("Cmax");
  for (int j = 0; j <= n; ++j)
    for (int k = 0; k <= n; ++k)
      if (j != k) model.binaries.push_back(z_name(j, k));

  using Sense = MipConstraint::Sense;
  for (int k = 0; k <= n; ++k) {
    MipConstraint c{MipTag::kPredecessor, "pred_" + std::to_string(k), {}, Sense::kEq, 1.0};
    for (int j = 0; j <= n; ++j)
      if (j != k) c.terms.push_back({1.0, z_name(j, k)});
    model.constraints.push_back(std::move(c));
  }
  for (int j = 0; j <= n; ++j) {
    MipConstraint c{MipTag::kSuccessor, "succ_" + std::to_string(j), {}, Sense::kEq, 1.0};
    for (int k = 0; k <= n; ++k)
      if (k != j) c.terms.push_back({1.0, z_name(j, k)});
    model.constraints.push_back(std::move(c));
  }
  // y_ij + x_ij <= y_ik + A_i (1 - z_jk)  <=>  y_ij - y_ik + A_i z_jk <= A_i - x_ij
  for (int i = 0; i < m; ++i) {
    const double a = model.big_m[i + 1];
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (j == k) continue;
        model.constraints.push_back(
            {MipTag::kPrecedence,
             "prec_" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + "_" + std::to_string(k + 1),
             {{1.0, y_name(i, j)}, {-1.0, y_name(i, k)}, {a, z_name(j + 1, k + 1)}},
             Sense::kLessEq,
             a - inst.at(i, j)});
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    model.constraints.push_back({MipTag::kMakespan,
                                 "cmax_" + std::to_string(j + 1),
                                 {{1.0, y_name(m - 1, j)}, {-1.0, "Cmax"}},
                                 Sense::kLessEq,
                                 -inst.at(m - 1, j)});
  }
  for (int i = 0; i + 1 < m; ++i) {
    for (int j = 0; j < n; ++j) {
      model.constraints.push_back({MipTag::kMachineChain,
                                   "chain_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                                   {{1.0, y_name(i, j)}, {-1.0, y_name(i + 1, j)}},
                                   Sense::kLessEq,
                                   -inst.at(i, j)});
    }
  }
  return model;
}

std::string to_lp(const MipModel& model, const std::string& title) {
  std::ostringstream os;
  os << "\\ " << title << ": permutation flow shop, " << model.jobs << " jobs, " << model.machines << " machines\n";
  os << "\\ big-M per machine:";
  for (int i = 1; i <= model.machines; ++i) os << " A_" << i << "=" << fmt(model.big_m[i]);
  os << "\n";
  os << "Minimize\n obj: Cmax\n";
  os << "Subject To\n";
  for (const auto& c : model.constraints) {
    os << " " << c.name << ":";
    bool first = true;
    for (const auto& t : c.terms) {
      if (t.coef == 0.0) continue;
      const bool neg = t.coef < 0.0;
      const double mag = std::abs(t.coef);
      os << (first ? (neg ? " -" : " ") : (neg ? " - " : " + "));
      if (mag != 1.0) os << fmt(mag) << " ";
      os << t.var;
      first = false;
    }
    if (first) os << " 0 " << model.continuous.back();
    os << (c.sense == MipConstraint::Sense::kEq ? " = " : " <= ") << fmt(c.rhs) << "\n";
  }
  os << "Bounds\n";
  for (const auto& v : model.continuous) os << " " << v << " >= 0\n";
  os << "Binaries\n";
  for (const auto& v : model.binaries) os << " " << v << "\n";
  os << "End\n";
  return os.str();
}

std::string emit_mip(const Instance& inst) {
  return to_lp(build_mip(inst), inst.name.empty() ? std::string("pfss") : inst.name);
}

MipSolution embed_permutation(const Instance& inst, const Permutation& perm) {
  const auto c = completion_times(inst, perm);
  const int m = inst.machines();
  const int n = inst.jobs();
  MipSolution sol;
  sol.y.assign(m, std::vector<double>(n, 0.0));
  sol.z.assign(n + 1, std::vector<double>(n + 1, 0.0));
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < m; ++i) sol.y[i][perm[t]] = c.at(i, t) - inst.at(i, perm[t]);
  int prev = 0;
  for (int t = 0; t < n; ++t) {
    sol.z[prev][perm[t] + 1] = 1.0;
    prev = perm[t] + 1;
  }
  sol.z[prev][0] = 1.0;
  sol.cmax = c.makespan();
  return sol;
}

std::vector<MipViolation> mip_violations(const Instance& inst, const MipSolution& sol, double tol) {
  const int m = inst.machines();
  const int n = inst.jobs();
  if (static_cast<int>(sol.y.size()) != m ||
      std::any_of(sol.y.begin(), sol.y.end(), [n](const auto& r) { return static_cast<int>(r.size()) != n; }))
    throw ValidationError("y must be machines x jobs");
  if (static_cast<int>(sol.z.size()) != n + 1 ||
      std::any_of(sol.z.begin(), sol.z.end(), [n](const auto& r) { return static_cast<int>(r.size()) != n + 1; }))
    throw ValidationError("z must be (jobs+1) x (jobs+1)");

  std::vector<MipViolation> out;
  auto report = [&](MipTag tag, std::string detail) { out.push_back({tag, std::move(detail)}); };
  std::vector<double> big_m(m + 1, 0.0);
  for (int i = 1; i <= m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += inst.at(i - 1, j);
    big_m[i] = big_m[i - 1] + s;
  }

  for (int j = 0; j <= n; ++j)
    for (int k = 0; k <= n; ++k) {
      if (j == k) continue;
      const double v = sol.z[j][k];
      if (!(std::abs(v) <= tol || std::abs(v - 1.0) <= tol)) report(MipTag::kBinary, z_name(j, k) + " not binary");
    }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (!(sol.y[i][j] >= -tol)) report(MipTag::kNonNegative, y_name(i, j) + " negative");
  if (!(sol.cmax >= -tol)) report(MipTag::kNonNegative, "Cmax negative");

  for (int k = 0; k <= n; ++k) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j)
      if (j != k) s += sol.z[j][k];
    if (!(std::abs(s - 1.0) <= tol)) report(MipTag::kPredecessor, "job " + std::to_string(k) + " predecessor sum " + fmt(s));
  }
  for (int j = 0; j <= n; ++j) {
    double s = 0.0;
    for (int k = 0; k <= n; ++k)
      if (k != j) s += sol.z[j][k];
    if (!(std::abs(s - 1.0) <= tol)) report(MipTag::kSuccessor, "job " + std::to_string(j) + " successor sum " + fmt(s));
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (j == k) continue;
        const double lhs = sol.y[i][j] + inst.at(i, j);
        const double rhs = sol.y[i][k] + big_m[i + 1] * (1.0 - sol.z[j + 1][k + 1]);
        if (!(lhs <= rhs + tol))
          report(MipTag::kPrecedence, "machine " + std::to_string(i + 1) + ": job " + std::to_string(j + 1) +
                                          " -> " + std::to_string(k + 1));
      }
  for (int j = 0; j < n; ++j)
    if (!(sol.y[m - 1][j] + inst.at(m - 1, j) <= sol.cmax + tol))
      report(MipTag::kMakespan, "job " + std::to_string(j + 1) + " ends after Cmax");
  for (int i = 0; i + 1 < m; ++i)
    for (int j = 0; j < n; ++j)
      if (!(sol.y[i][j] + inst.at(i, j) <= sol.y[i + 1][j] + tol))
        report(MipTag::kMachineChain, "job " + std::to_string(j + 1) + " starts on machine " + std::to_string(i + 2) +
                                          " before finishing machine " + std::to_string(i + 1));
  return out;
}

bool check_mip_solution(const Instance& inst, const std::vector<std::vector<double>>& y,
                        const std::vector<std::vector<double>>& z, double cmax, double tol) {
  return mip_violations(inst, MipSolution{y, z, cmax}, tol).empty();
}

}  // namespace pfss
