#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fvkit::tsv {

// A parsed tab-separated table. Leading lines starting with '#' are kept
// verbatim in `comments`; the first non-comment line is the header row.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the source file for each row, for error messages.
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column_index(std::string_view name) const;
  // Throws MissingColumn when absent.
  std::size_t require_column(std::string_view name) const;
};

std::vector<std::string> split(std::string_view line, char sep = '\t');
std::string join(const std::vector<std::string>& fields, std::string_view sep = "\t");

Table read_table(const std::filesystem::path& path);
Table parse_table(std::string_view text, std::string_view source = "<memory>");

// Whole-file helpers used by every writer so outputs are byte-stable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string format_fixed(double value, int decimals);
// Shortest representation that round-trips to the same double.
std::string format_shortest(double value);

double parse_double(std::string_view field, std::string_view what);
std::int64_t parse_int(std::string_view field, std::string_view what);

}  // namespace fvkit::tsv
