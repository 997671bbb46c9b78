#include "fvkit/run_header.hpp"

#include <cstdio>

#include "fvkit/error.hpp"

namespace fvkit {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

std::string format_run_header(std::string_view command, const nlohmann::json& config, std::uint64_t seed) {
  std::string out = "# fvkit " + std::string(kToolVersion) + " " + std::string(command) + '\n';
  out += "# seed: " + std::to_string(seed) + '\n';
  out += "# config-hash: " + config_hash(config) + '\n';
  out += "# config: " + config.dump() + '\n';
  return out;
}

RunHeader parse_run_header(std::string_view text) {
  RunHeader h;
  bool have_config = false;
  bool have_banner = false;
  std::size_t pos = 0;
  while (pos < text.size() && text[pos] == '#') {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.starts_with("# fvkit ")) {
      line.remove_prefix(8);
      const auto space = line.find(' ');
      h.version = std::string(line.substr(0, space));
      if (space != std::string_view::npos) h.command = std::string(line.substr(space + 1));
      have_banner = true;
    } else if (line.starts_with("# seed: ")) {
      h.seed = std::stoull(std::string(line.substr(8)));
    } else if (line.starts_with("# config-hash: ")) {
      h.config_hash = std::string(line.substr(15));
    } else if (line.starts_with("# config: ")) {
      h.config = nlohmann::json::parse(line.substr(10), nullptr, false);
      have_config = !h.config.is_discarded();
    }
  }
  if (!have_banner || !have_config) throw Error(ErrorCode::UnparsableField, "missing run header");
  if (config_hash(h.config) != h.config_hash) {
    throw Error(ErrorCode::UnparsableField, "run header config does not match its hash");
  }
  return h;
}

}  // namespace fvkit
