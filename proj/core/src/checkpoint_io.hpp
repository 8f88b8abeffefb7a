#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcgsql/errors.hpp"
#include "dcgsql/nn.hpp"
#include "json.hpp"

namespace dcgsql::detail {

// Checkpoint layout: one-line JSON header, '\n', then the concatenation of
// all parameter tensors as little-endian 64-bit floats.

inline void write_le_double(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline double read_le_double(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline std::string checkpoint_bytes(const nlohmann::json& header,
                                    const std::vector<const nn::Matrix*>& tensors) {
  std::ostringstream out(std::ios::binary);
  out << header.dump() << "\n";
  for (const nn::Matrix* t : tensors)
    for (double v : t->data) write_le_double(out, v);
  return out.str();
}

inline void write_checkpoint(const std::string& path, const nlohmann::json& header,
                             const std::vector<const nn::Matrix*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write checkpoint '" + path + "'");
  out << checkpoint_bytes(header, tensors);
}

inline nlohmann::json read_checkpoint_header(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw UserError("checkpoint '" + path + "' is empty");
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw UserError("checkpoint '" + path + "' has a malformed header: " + e.what());
  }
}

inline void read_tensors(std::ifstream& in, const std::string& path,
                         const std::vector<nn::Matrix*>& tensors) {
  for (nn::Matrix* t : tensors) {
    for (double& v : t->data) {
      v = read_le_double(in);
      if (!in) throw UserError("checkpoint '" + path + "' is truncated");
    }
  }
  char extra;
  if (in.read(&extra, 1))
    throw UserError("checkpoint '" + path + "' has trailing bytes");
}

/// FNV-1a 64-bit over a file's bytes, as a hex string.
inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open '" + path + "' for fingerprinting");
  std::uint64_t hash = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  return std::string(hex);
}

inline std::string bytes_fingerprint(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  return std::string(hex);
}

}  // namespace dcgsql::detail
