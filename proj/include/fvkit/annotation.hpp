#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fvkit {

enum class SameIdentity { Same, Different, Unsure };

std::string_view to_string(SameIdentity v);
std::optional<SameIdentity> parse_same_identity(std::string_view text);

struct AnnotationRecord {
  std::string pair_id;  // test_image_id + "|" + train_image_id
  SameIdentity same_identity = SameIdentity::Unsure;
  bool same_image = false;
  std::string annotator;
  std::int64_t timestamp = 0;  // UTC seconds
  // Set when the annotator explicitly replaced another annotator's decision.
  bool override_conflict = false;

  bool same_decision(const AnnotationRecord& other) const {
    return same_identity == other.same_identity && same_image == other.same_image;
  }
};

// Throws InvalidAnnotation when same_image is set without same_identity = same.
void validate(const AnnotationRecord& record);

// One JSON object per line.
std::string to_log_line(const AnnotationRecord& record);
// Returns nullopt for lines that are not a complete, valid record (a torn
// final write after a crash, for instance).
std::optional<AnnotationRecord> parse_log_line(std::string_view line);

struct LogReplay {
  std::vector<AnnotationRecord> records;
  std::size_t skipped_lines = 0;
};

LogReplay replay_log(const std::filesystem::path& path);
LogReplay parse_log(std::string_view text);

// Append-only annotation log. Every append is flushed before returning.
class AnnotationLog {
 public:
  explicit AnnotationLog(std::filesystem::path path);

  void append(const AnnotationRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

}  // namespace fvkit
