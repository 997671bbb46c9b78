#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace fvkit {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Provenance block written at the top of every text output as '#' lines:
//   # fvkit 0.1.0 <command>
//   # seed: <seed>
//   # config-hash: <fnv1a-64 of the config JSON>
//   # config: <canonical JSON>
struct RunHeader {
  std::string version;
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
};

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const nlohmann::json& config);
std::string format_run_header(std::string_view command, const nlohmann::json& config, std::uint64_t seed);
// Reads the block back from the start of a file's text. Throws
// UnparsableField when absent or inconsistent with its hash.
RunHeader parse_run_header(std::string_view text);

}  // namespace fvkit
