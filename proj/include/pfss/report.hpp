#pragma once

// Result tables shared by heuristic and learned methods.
//
// CSV layout, one row per report row:
//   method,n,m,makespan,gap_pct,time_s,group
// makespan and gap_pct are averaged over instances and seeds, time_s is the
// per-seed wall-clock sum over instances averaged over seeds, and group tags
// sweep rows (for example "sigma=2"); it is empty for plain runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pfss {

struct SeedDetail {
  uint64_t seed = 0;
  double makespan = 0.0;
  double gap_pct = 0.0;
  double time_s = 0.0;
  std::vector<double> makespans;  // per instance

  friend bool operator==(const SeedDetail&, const SeedDetail&) = default;
};

struct ReportRow {
  std::string method;
  int n = 0;
  int m = 0;
  double makespan = 0.0;
  double gap_pct = 0.0;
  double time_s = 0.0;
  std::string group;
  std::vector<SeedDetail> seeds;
  // Signed-rank test of per-instance makespans (seed means) against the expert.
  std::optional<double> wilcoxon_p;
  bool significant = false;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  std::vector<ReportRow> rows;
  // expert name, expert per-instance makespans per group, config, revision
  nlohmann::json metadata = nlohmann::json::object();

  const ReportRow* find(const std::string& method, const std::string& group = {}) const;
  friend bool operator==(const Report&, const Report&) = default;
};

inline constexpr const char* kCsvHeader = "method,n,m,makespan,gap_pct,time_s,group";

nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);
std::string to_csv(const Report& r);
// Reads the CSV columns back; seed details and metadata are not part of the CSV.
Report report_from_csv(const std::string& text);

enum class ReportFormat { kCsv, kJson };
ReportFormat format_for(const std::filesystem::path& path);
void write_report(const std::filesystem::path& path, const Report& r, std::optional<ReportFormat> format = {});
Report read_report(const std::filesystem::path& path);

}  // namespace pfss
