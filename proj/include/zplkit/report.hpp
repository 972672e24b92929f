#pragma once

// Shared report plumbing for the command-line tool: content digests, the
// common JSON envelope, and timestamping. Reports are meant to be diffable,
// so everything except generated_at is deterministic for a given input.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <string>
#include <string_view>

#include "json.hpp"

namespace zplkit {

inline constexpr const char* tool_version = "0.1.0";

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json base_report(const std::string& command) {
  nlohmann::ordered_json r;
  r["schema_version"] = 1;
  r["tool"] = "zplkit";
  r["version"] = tool_version;
  r["command"] = command;
  r["generated_at"] = utc_timestamp();
  r["inputs"] = nlohmann::ordered_json::array();
  r["warnings"] = nlohmann::ordered_json::array();
  return r;
}

inline void add_input(nlohmann::ordered_json& report, const std::string& path,
                      std::string_view content) {
  report["inputs"].push_back({{"path", path}, {"fnv1a64", fnv1a64_hex(content)}});
}

inline nlohmann::ordered_json value_with_error(double value, double err) {
  return {{"value", value}, {"stderr", err}};
}

}  // namespace zplkit
