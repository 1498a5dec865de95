#pragma once

// Run manifests: every CLI command drops a manifest.json next to its outputs
// recording the resolved configuration, seeds, input-file checksums, and the
// software version. Manifests are fully deterministic -- no timestamps --
// so identical runs produce identical bytes. Wall-clock timing goes to
// stderr, never into the manifest.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace aorist {

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a over the raw bytes; cheap, stable, good enough to catch swapped or
// edited inputs (not cryptographic).
inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot checksum " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= std::uint8_t(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)h);
  return hex;
}

inline nlohmann::ordered_json make_manifest(const std::string& command,
                                            const nlohmann::ordered_json& config,
                                            const std::vector<std::string>& input_paths) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = config;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& p : input_paths) inputs[p] = file_checksum(p);
  m["inputs"] = inputs;
  return m;
}

inline void write_manifest(const std::string& path, const nlohmann::ordered_json& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << m.dump(2) << '\n';
}

}  // namespace aorist
