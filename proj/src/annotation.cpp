#include "fvkit/annotation.hpp"

#include "json.hpp"

#include "fvkit/error.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

std::string_view to_string(SameIdentity v) {
  switch (v) {
    case SameIdentity::Same: return "same";
    case SameIdentity::Different: return "different";
    case SameIdentity::Unsure: return "unsure";
  }
  return "unsure";
}

std::optional<SameIdentity> parse_same_identity(std::string_view text) {
  if (text == "same") return SameIdentity::Same;
  if (text == "different") return SameIdentity::Different;
  if (text == "unsure") return SameIdentity::Unsure;
  return std::nullopt;
}

void validate(const AnnotationRecord& record) {
  if (record.same_image && record.same_identity != SameIdentity::Same) {
    throw Error(ErrorCode::InvalidAnnotation, record.pair_id + ": same_image requires same_identity = same");
  }
  if (record.pair_id.find('|') == std::string::npos) {
    throw Error(ErrorCode::InvalidAnnotation, "pair id '" + record.pair_id + "' lacks '|'");
  }
}

std::string to_log_line(const AnnotationRecord& r) {
  nlohmann::ordered_json j;
  j["pair_id"] = r.pair_id;
  j["same_identity"] = std::string(to_string(r.same_identity));
  j["same_image"] = r.same_image;
  j["annotator"] = r.annotator;
  j["timestamp"] = r.timestamp;
  if (r.override_conflict) j["override"] = true;
  return j.dump();
}

std::optional<AnnotationRecord> parse_log_line(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object()) return std::nullopt;
  try {
    AnnotationRecord r;
    r.pair_id = j.at("pair_id").get<std::string>();
    auto same = parse_same_identity(j.at("same_identity").get<std::string>());
    if (!same) return std::nullopt;
    r.same_identity = *same;
    r.same_image = j.value("same_image", false);
    r.annotator = j.at("annotator").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    r.override_conflict = j.value("override", false);
    validate(r);
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

LogReplay parse_log(std::string_view text) {
  LogReplay replay;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    const bool terminated = end != std::string_view::npos;
    if (!terminated) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    auto rec = terminated ? parse_log_line(line) : std::nullopt;
    if (rec) {
      replay.records.push_back(std::move(*rec));
    } else {
      ++replay.skipped_lines;
    }
  }
  return replay;
}

LogReplay replay_log(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return parse_log(tsv::read_file(path));
}

AnnotationLog::AnnotationLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  // A torn final line from an earlier crash is terminated so the next record
  // starts on its own line.
  bool needs_newline = false;
  if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
    std::ifstream in(path_, std::ios::binary);
    in.seekg(-1, std::ios::end);
    needs_newline = in.get() != '\n';
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::IoError, "cannot open annotation log " + path_.string());
  if (needs_newline) out_ << '\n' << std::flush;
}

void AnnotationLog::append(const AnnotationRecord& record) {
  validate(record);
  const std::string line = to_log_line(record) + '\n';
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoError, "append to " + path_.string() + " failed");
}

}  // namespace fvkit
