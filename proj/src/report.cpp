#include "pfss/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfss/errors.hpp"
#include "pfss/instance_io.hpp"

namespace pfss {

const ReportRow* Report::find(const std::string& method, const std::string& group) const {
  for (const auto& r : rows)
    if (r.method == method && r.group == group) return &r;
  return nullptr;
}

nlohmann::json to_json(const Report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : row.seeds)
      seeds.push_back({{"seed", s.seed},
                       {"makespan", s.makespan},
                       {"gap_pct", s.gap_pct},
                       {"time_s", s.time_s},
                       {"makespans", s.makespans}});
    nlohmann::json j{{"method", row.method}, {"n", row.n},           {"m", row.m},
                     {"makespan", row.makespan}, {"gap_pct", row.gap_pct}, {"time_s", row.time_s},
                     {"group", row.group},   {"seeds", seeds},       {"significant", row.significant}};
    j["wilcoxon_p"] = row.wilcoxon_p ? nlohmann::json(*row.wilcoxon_p) : nlohmann::json(nullptr);
    rows.push_back(std::move(j));
  }
  return {{"rows", rows}, {"metadata", r.metadata}};
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.metadata = j.value("metadata", nlohmann::json::object());
    for (const auto& jr : j.at("rows")) {
      ReportRow row;
      row.method = jr.at("method").get<std::string>();
      row.n = jr.at("n").get<int>();
      row.m = jr.at("m").get<int>();
      row.makespan = jr.at("makespan").get<double>();
      row.gap_pct = jr.at("gap_pct").get<double>();
      row.time_s = jr.at("time_s").get<double>();
      row.group = jr.value("group", std::string{});
      row.significant = jr.value("significant", false);
      if (jr.contains("wilcoxon_p") && !jr["wilcoxon_p"].is_null()) row.wilcoxon_p = jr["wilcoxon_p"].get<double>();
      for (const auto& js : jr.value("seeds", nlohmann::json::array())) {
        SeedDetail s;
        s.seed = js.at("seed").get<uint64_t>();
        s.makespan = js.at("makespan").get<double>();
        s.gap_pct = js.at("gap_pct").get<double>();
        s.time_s = js.at("time_s").get<double>();
        s.makespans = js.value("makespans", std::vector<double>{});
        row.seeds.push_back(std::move(s));
      }
      r.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, int line_no) {
  std::vector<std::string> cells(1);
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  if (in_quotes) throw ParseError("unterminated quote", line_no);
  return cells;
}

}  // namespace

std::string to_csv(const Report& r) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& row : r.rows)
    os << quoted(row.method) << ',' << row.n << ',' << row.m << ',' << num(row.makespan) << ',' << num(row.gap_pct)
       << ',' << num(row.time_s) << ',' << quoted(row.group) << '\n';
  return os.str();
}

Report report_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line) || line != kCsvHeader) throw ParseError("expected header " + std::string(kCsvHeader), 1);
  ++line_no;
  Report r;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line, line_no);
    if (cells.size() != 7) throw ParseError("expected 7 columns, got " + std::to_string(cells.size()), line_no);
    ReportRow row;
    try {
      row.method = cells[0];
      row.n = std::stoi(cells[1]);
      row.m = std::stoi(cells[2]);
      row.makespan = std::stod(cells[3]);
      row.gap_pct = std::stod(cells[4]);
      row.time_s = std::stod(cells[5]);
      row.group = cells[6];
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", line_no);
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

ReportFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? ReportFormat::kCsv : ReportFormat::kJson;
}

void write_report(const std::filesystem::path& path, const Report& r, std::optional<ReportFormat> format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  if (format.value_or(format_for(path)) == ReportFormat::kCsv)
    out << to_csv(r);
  else
    out << to_json(r).dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Report read_report(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (format_for(path) == ReportFormat::kCsv) return report_from_csv(text);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + ": not valid JSON");
  return report_from_json(j);
}

}  // namespace pfss
