#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pfss/core.hpp"

namespace pfss {

enum class Distribution { kGamma, kNormal };

struct DatasetSpec {
  int count = 1;
  int jobs = 20;
  int machines = 5;
  Distribution distribution = Distribution::kGamma;
  double gamma_shape = 1.0;   // k
  double gamma_scale = 2.0;   // theta
  double normal_mean = 6.0;   // mu
  double normal_stddev = 6.0; // sigma; 0 gives identical jobs
  uint64_t seed = 0;

  static DatasetSpec gamma(int count, int jobs, int machines, uint64_t seed);
  static DatasetSpec normal(int count, int jobs, int machines, double stddev, uint64_t seed);

  void validate() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

// Instance i is drawn from its own stream seeded by Rng::derive(spec.seed, i),
// entries in machine-major order. Normal draws are clamped at zero.
std::vector<Instance> generate(const DatasetSpec& spec);
Instance generate_one(const DatasetSpec& spec, int index);

// Taillard layout: per instance a "number of jobs, number of machines, ..."
// line, a line "n m seed upper lower", a "processing times :" line and then
// m rows of n integers. A bare "n m" header followed by the rows is accepted.
std::vector<Instance> parse_taillard(std::string_view text);

// VRF layout: a line "n m", then one line per job with m pairs
// "machine_index processing_time" (machine indices 0-based).
std::vector<Instance> parse_vrf(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

inline constexpr uint8_t kDatasetVersion = 1;

void save_dataset(const std::filesystem::path& path, const std::vector<Instance>& instances,
                  const std::optional<DatasetSpec>& spec = std::nullopt);
std::vector<Instance> load_dataset(const std::filesystem::path& path);
std::optional<DatasetSpec> load_dataset_spec(const std::filesystem::path& path);

}  // namespace pfss
