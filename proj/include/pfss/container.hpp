#pragma once

// Versioned binary container shared by dataset, trace and checkpoint files.
//
// Byte layout (all integers little-endian):
//   [0, 4)    magic, four ASCII bytes identifying the file kind
//   [4]       format version (uint8)
//   [5, 8)    reserved, zero
//   [8, 16)   header length H in bytes (uint64)
//   [16, 16+H) UTF-8 JSON header; always carries "version", "body_bytes" and
//             "body_fnv1a64" (hex string of the FNV-1a 64 hash of the body)
//   [16+H, end) body

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pfss::container {

struct File {
  nlohmann::json header;
  std::vector<uint8_t> body;
};

uint64_t fnv1a64(const uint8_t* data, size_t size);
std::string hex64(uint64_t v);

void write(const std::filesystem::path& path, std::string_view magic, uint8_t version, nlohmann::json header,
           const std::vector<uint8_t>& body);

// Throws DataError on wrong magic, version mismatch, truncated or corrupt body.
File read(const std::filesystem::path& path, std::string_view magic, uint8_t version);

void append_f64(std::vector<uint8_t>& out, double v);
void append_f32(std::vector<uint8_t>& out, float v);
void append_u32(std::vector<uint8_t>& out, uint32_t v);
double read_f64(const uint8_t* p);
float read_f32(const uint8_t* p);
uint32_t read_u32(const uint8_t* p);

}  // namespace pfss::container
