#include "pfss/instance_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pfss/container.hpp"
#include "pfss/errors.hpp"
#include "pfss/rng.hpp"

namespace pfss {

DatasetSpec DatasetSpec::gamma(int count, int jobs, int machines, uint64_t seed) {
  DatasetSpec s;
  s.count = count;
  s.jobs = jobs;
  s.machines = machines;
  s.distribution = Distribution::kGamma;
  s.seed = seed;
  return s;
}

DatasetSpec DatasetSpec::normal(int count, int jobs, int machines, double stddev, uint64_t seed) {
  DatasetSpec s;
  s.count = count;
  s.jobs = jobs;
  s.machines = machines;
  s.distribution = Distribution::kNormal;
  s.normal_stddev = stddev;
  s.seed = seed;
  return s;
}

void DatasetSpec::validate() const {
  if (count < 0) throw ValidationError("dataset count must be >= 0");
  if (jobs < 1 || machines < 1) throw ValidationError("dataset needs jobs >= 1 and machines >= 1");
  if (distribution == Distribution::kGamma) {
    if (!(gamma_shape > 0.0) || !(gamma_scale > 0.0)) throw ValidationError("gamma shape and scale must be positive");
  } else {
    if (!(normal_stddev >= 0.0)) throw ValidationError("normal stddev must be >= 0");
    if (!std::isfinite(normal_mean)) throw ValidationError("normal mean must be finite");
  }
}

nlohmann::json DatasetSpec::to_json() const {
  nlohmann::json j{{"count", count}, {"jobs", jobs}, {"machines", machines}, {"seed", seed}};
  if (distribution == Distribution::kGamma) {
    j["distribution"] = "gamma";
    j["shape"] = gamma_shape;
    j["scale"] = gamma_scale;
  } else {
    j["distribution"] = "normal";
    j["mean"] = normal_mean;
    j["stddev"] = normal_stddev;
  }
  return j;
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.count = j.at("count").get<int>();
  s.jobs = j.at("jobs").get<int>();
  s.machines = j.at("machines").get<int>();
  s.seed = j.at("seed").get<uint64_t>();
  const auto dist = j.at("distribution").get<std::string>();
  if (dist == "gamma") {
    s.distribution = Distribution::kGamma;
    s.gamma_shape = j.at("shape").get<double>();
    s.gamma_scale = j.at("scale").get<double>();
  } else if (dist == "normal") {
    s.distribution = Distribution::kNormal;
    s.normal_mean = j.at("mean").get<double>();
    s.normal_stddev = j.at("stddev").get<double>();
  } else {
    throw DataError("unknown distribution '" + dist + "'");
  }
  return s;
}

Instance generate_one(const DatasetSpec& spec, int index) {
  Rng rng(Rng::derive(spec.seed, static_cast<uint64_t>(index)));
  std::vector<double> times(static_cast<size_t>(spec.machines) * spec.jobs);
  for (double& x : times) {
    if (spec.distribution == Distribution::kGamma) {
      x = rng.gamma(spec.gamma_shape, spec.gamma_scale);
    } else {
      x = spec.normal_stddev == 0.0 ? spec.normal_mean : std::max(0.0, rng.normal(spec.normal_mean, spec.normal_stddev));
    }
  }
  Instance inst(spec.machines, spec.jobs, std::move(times));
  inst.name = "gen-" + std::to_string(index);
  inst.source = spec.distribution == Distribution::kGamma ? "gamma" : "normal";
  inst.seed = spec.seed;
  return inst;
}

std::vector<Instance> generate(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Instance> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_one(spec, i));
  return out;
}

namespace {

struct Line {
  int number;
  std::string text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int no = 1;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t end = text.find('\n', pos);
    std::string_view piece = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (!piece.empty() && piece.back() == '\r') piece.remove_suffix(1);
    lines.push_back({no, std::string(piece)});
    if (end == std::string_view::npos) break;
    pos = end + 1;
    ++no;
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Parses whitespace-separated numbers; nullopt if any token is not numeric.
std::optional<std::vector<double>> numbers(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    double v;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
    out.push_back(v);
  }
  return out;
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : lines_(split_lines(text)) {}
  // Skips blank lines; false at end of input.
  bool next_nonblank() {
    while (pos_ < lines_.size() && is_blank(lines_[pos_].text)) ++pos_;
    return pos_ < lines_.size();
  }
  const Line& peek() const { return lines_[pos_]; }
  const Line& take() { return lines_[pos_++]; }
  int last_line() const { return lines_.empty() ? 1 : lines_.back().number; }

 private:
  std::vector<Line> lines_;
  size_t pos_ = 0;
};

int as_count(double v, const char* what, int line) {
  if (v < 1 || v != static_cast<int>(v)) throw ParseError(std::string("invalid ") + what, line);
  return static_cast<int>(v);
}

}  // namespace

std::vector<Instance> parse_taillard(std::string_view text) {
  Cursor cur(text);
  std::vector<Instance> out;
  while (cur.next_nonblank()) {
    const int index = static_cast<int>(out.size()) + 1;
    Line header = cur.take();
    auto nums = numbers(header.text);
    if (!nums) {
      if (header.text.find("number of jobs") == std::string::npos)
        throw ParseError("expected instance header, got '" + header.text + "'", header.number);
      if (!cur.next_nonblank()) throw ParseError("missing job/machine count line", cur.last_line());
      header = cur.take();
      nums = numbers(header.text);
    }
    if (!nums || nums->size() < 2) throw ParseError("malformed job/machine count line", header.number);
    const int n = as_count((*nums)[0], "job count", header.number);
    const int m = as_count((*nums)[1], "machine count", header.number);

    if (!cur.next_nonblank()) throw ParseError("instance " + std::to_string(index) + ": missing row 1 of " +
                                                   std::to_string(m), cur.last_line());
    if (!numbers(cur.peek().text)) {
      const Line& label = cur.take();
      if (label.text.find("processing times") == std::string::npos)
        throw ParseError("expected 'processing times', got '" + label.text + "'", label.number);
    }
    std::vector<double> times;
    times.reserve(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
      if (!cur.next_nonblank())
        throw ParseError("instance " + std::to_string(index) + ": missing row " + std::to_string(i + 1) + " of " +
                             std::to_string(m),
                         cur.last_line());
      const Line& row = cur.take();
      auto vals = numbers(row.text);
      if (!vals)
        throw ParseError("instance " + std::to_string(index) + ": row " + std::to_string(i + 1) +
                             " is not numeric (missing row?)",
                         row.number);
      if (static_cast<int>(vals->size()) != n)
        throw ParseError("row " + std::to_string(i + 1) + " has " + std::to_string(vals->size()) + " entries, expected " +
                             std::to_string(n),
                         row.number);
      for (double v : *vals)
        if (v < 0) throw ParseError("negative processing time", row.number);
      times.insert(times.end(), vals->begin(), vals->end());
    }
    Instance inst(m, n, std::move(times));
    inst.name = "taillard-" + std::to_string(index);
    inst.source = "taillard";
    if (nums->size() >= 3) inst.seed = static_cast<uint64_t>((*nums)[2]);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> parse_vrf(std::string_view text) {
  Cursor cur(text);
  std::vector<Instance> out;
  while (cur.next_nonblank()) {
    const int index = static_cast<int>(out.size()) + 1;
    const Line& header = cur.take();
    auto nums = numbers(header.text);
    if (!nums || nums->size() != 2) throw ParseError("expected 'jobs machines' header", header.number);
    const int n = as_count((*nums)[0], "job count", header.number);
    const int m = as_count((*nums)[1], "machine count", header.number);
    std::vector<double> times(static_cast<size_t>(m) * n, 0.0);
    for (int j = 0; j < n; ++j) {
      if (!cur.next_nonblank())
        throw ParseError("instance " + std::to_string(index) + ": missing job row " + std::to_string(j + 1) + " of " +
                             std::to_string(n),
                         cur.last_line());
      const Line& row = cur.take();
      auto vals = numbers(row.text);
      if (!vals || static_cast<int>(vals->size()) != 2 * m)
        throw ParseError("job row " + std::to_string(j + 1) + " must hold " + std::to_string(m) +
                             " machine/time pairs",
                         row.number);
      std::vector<char> seen(m, 0);
      for (int p = 0; p < m; ++p) {
        const double mi = (*vals)[2 * p];
        const double t = (*vals)[2 * p + 1];
        if (mi < 0 || mi >= m || mi != static_cast<int>(mi))
          throw ParseError("machine index " + std::to_string(mi) + " out of range [0, " + std::to_string(m) + ")",
                           row.number);
        const int i = static_cast<int>(mi);
        if (seen[i]) throw ParseError("machine index " + std::to_string(i) + " repeated", row.number);
        if (t < 0) throw ParseError("negative processing time", row.number);
        seen[i] = 1;
        times[static_cast<size_t>(i) * n + j] = t;
      }
    }
    Instance inst(m, n, std::move(times));
    inst.name = "vrf-" + std::to_string(index);
    inst.source = "vrf";
    out.push_back(std::move(inst));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_dataset(const std::filesystem::path& path, const std::vector<Instance>& instances,
                  const std::optional<DatasetSpec>& spec) {
  nlohmann::json header;
  header["kind"] = "pfss-dataset";
  header["generator"] = Rng::kGeneratorName;
  header["count"] = instances.size();
  header["spec"] = spec ? spec->to_json() : nlohmann::json(nullptr);
  auto& list = header["instances"] = nlohmann::json::array();
  std::vector<uint8_t> body;
  for (const auto& inst : instances) {
    nlohmann::json meta{{"machines", inst.machines()}, {"jobs", inst.jobs()}, {"name", inst.name},
                        {"source", inst.source}};
    meta["seed"] = inst.seed ? nlohmann::json(*inst.seed) : nlohmann::json(nullptr);
    list.push_back(std::move(meta));
    for (double x : inst.times()) container::append_f64(body, x);
  }
  container::write(path, "PFDS", kDatasetVersion, std::move(header), body);
}

std::vector<Instance> load_dataset(const std::filesystem::path& path) {
  const auto file = container::read(path, "PFDS", kDatasetVersion);
  const auto& list = file.header.at("instances");
  if (list.size() != file.header.at("count").get<size_t>()) throw DataError(path.string() + ": count mismatch");
  std::vector<Instance> out;
  size_t offset = 0;
  for (const auto& meta : list) {
    const int m = meta.at("machines").get<int>();
    const int n = meta.at("jobs").get<int>();
    const size_t cells = static_cast<size_t>(m) * n;
    if (offset + cells * 8 > file.body.size()) throw DataError(path.string() + ": corrupt body (too short)");
    std::vector<double> times(cells);
    for (size_t c = 0; c < cells; ++c) times[c] = container::read_f64(file.body.data() + offset + 8 * c);
    offset += cells * 8;
    Instance inst(m, n, std::move(times));
    inst.name = meta.value("name", std::string{});
    inst.source = meta.value("source", std::string{});
    if (meta.contains("seed") && !meta["seed"].is_null()) inst.seed = meta["seed"].get<uint64_t>();
    out.push_back(std::move(inst));
  }
  if (offset != file.body.size()) throw DataError(path.string() + ": corrupt body (trailing bytes)");
  return out;
}

std::optional<DatasetSpec> load_dataset_spec(const std::filesystem::path& path) {
  const auto file = container::read(path, "PFDS", kDatasetVersion);
  if (!file.header.contains("spec") || file.header["spec"].is_null()) return std::nullopt;
  return DatasetSpec::from_json(file.header["spec"]);
}

}  // namespace pfss
