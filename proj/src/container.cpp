#include "pfss/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pfss/errors.hpp"

namespace pfss::container {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

uint64_t fnv1a64(const uint8_t* data, size_t size) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write(const std::filesystem::path& path, std::string_view magic, uint8_t version, nlohmann::json header,
           const std::vector<uint8_t>& body) {
  header["version"] = version;
  header["body_bytes"] = body.size();
  header["body_fnv1a64"] = hex64(fnv1a64(body.data(), body.size()));
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  uint8_t prefix[16] = {};
  std::memcpy(prefix, magic.data(), 4);
  prefix[4] = version;
  const uint64_t len = text.size();
  std::memcpy(prefix + 8, &len, 8);
  out.write(reinterpret_cast<const char*>(prefix), 16);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw DataError("short write to " + path.string());
}

File read(const std::filesystem::path& path, std::string_view magic, uint8_t version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 16) throw DataError(name + ": truncated container prefix");
  if (std::memcmp(bytes.data(), magic.data(), 4) != 0)
    throw DataError(name + ": wrong file kind (expected " + std::string(magic) + ")");
  if (bytes[4] != version)
    throw DataError(name + ": version mismatch (file " + std::to_string(bytes[4]) + ", supported " +
                    std::to_string(version) + ")");
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (len > bytes.size() - 16) throw DataError(name + ": truncated header");
  File f;
  try {
    f.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": corrupt header: " + e.what());
  }
  if (f.header.value("version", -1) != version) throw DataError(name + ": header version mismatch");
  f.body.assign(bytes.begin() + 16 + static_cast<long>(len), bytes.end());
  if (f.body.size() != f.header.value("body_bytes", uint64_t{0}))
    throw DataError(name + ": corrupt body (size " + std::to_string(f.body.size()) + ")");
  if (hex64(fnv1a64(f.body.data(), f.body.size())) != f.header.value("body_fnv1a64", std::string{}))
    throw DataError(name + ": corrupt body (checksum mismatch)");
  return f;
}

void append_f64(std::vector<uint8_t>& out, double v) {
  uint8_t b[8];
  std::memcpy(b, &v, 8);
  out.insert(out.end(), b, b + 8);
}

void append_f32(std::vector<uint8_t>& out, float v) {
  uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

double read_f64(const uint8_t* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

float read_f32(const uint8_t* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

uint32_t read_u32(const uint8_t* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace pfss::container
