#include "fvkit/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <unordered_set>

#include "fvkit/error.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

namespace {

constexpr std::string_view kMagic = "EMB1";

std::uint32_t read_u32_le(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
  }
  return v;
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(v & 0xffu));
    v >>= 8;
  }
}

}  // namespace

std::string_view to_string(Demographic d) {
  switch (d) {
    case Demographic::AAM: return "AAM";
    case Demographic::AAF: return "AAF";
    case Demographic::CM: return "CM";
    case Demographic::CF: return "CF";
    case Demographic::OTHER: return "OTHER";
  }
  return "OTHER";
}

Demographic parse_demographic(std::string_view text) {
  for (Demographic d : kAllDemographics) {
    if (to_string(d) == text) return d;
  }
  throw Error(ErrorCode::UnparsableField, "unknown demographic '" + std::string(text) + "'");
}

EmbeddingSet parse_embeddings(std::string_view bytes) {
  if (bytes.size() < kMagic.size()) {
    if (kMagic.substr(0, bytes.size()) == bytes) {
      throw Error(ErrorCode::TruncatedFile, "file shorter than magic");
    }
    throw Error(ErrorCode::BadMagic, "missing EMB1 magic");
  }
  if (bytes.substr(0, 4) != kMagic) throw Error(ErrorCode::BadMagic, "missing EMB1 magic");
  if (bytes.size() < 12) throw Error(ErrorCode::TruncatedFile, "header incomplete");

  EmbeddingSet set;
  const std::uint32_t n = read_u32_le(bytes, 4);
  set.dim = read_u32_le(bytes, 8);
  if (set.dim == 0) throw Error(ErrorCode::ZeroDim, "header declares dim = 0");

  const std::uint64_t floats = static_cast<std::uint64_t>(n) * set.dim;
  const std::uint64_t payload_end = 12 + floats * 4;
  if (bytes.size() < payload_end) {
    throw Error(ErrorCode::TruncatedFile, "payload holds " + std::to_string((bytes.size() - 12) / 4) +
                                              " floats, header declares " + std::to_string(floats));
  }
  set.data.resize(static_cast<std::size_t>(floats));
  for (std::size_t i = 0; i < set.data.size(); ++i) {
    const float v = std::bit_cast<float>(read_u32_le(bytes, 12 + i * 4));
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i / set.dim));
    }
    set.data[i] = v;
  }

  std::size_t pos = static_cast<std::size_t>(payload_end);
  std::unordered_set<std::string_view> seen;
  set.ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) {
      throw Error(ErrorCode::TruncatedFile, "image id list ends after " + std::to_string(i) + " of " +
                                                std::to_string(n) + " ids");
    }
    std::string_view id = bytes.substr(pos, end - pos);
    if (id.empty() || id.find_first_of("\t\r") != std::string_view::npos) {
      throw Error(ErrorCode::MalformedFile, "invalid image id at row " + std::to_string(i));
    }
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::DuplicateImageId, std::string(id));
    }
    set.ids.emplace_back(id);
    pos = end + 1;
  }
  if (pos != bytes.size()) {
    throw Error(ErrorCode::MalformedFile,
                std::to_string(bytes.size() - pos) + " trailing bytes after id list");
  }
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(tsv::read_file(path));
}

std::string serialize_embeddings(const EmbeddingSet& set) {
  std::string out;
  out.reserve(12 + set.data.size() * 4 + set.ids.size() * 16);
  out += kMagic;
  append_u32_le(out, static_cast<std::uint32_t>(set.ids.size()));
  append_u32_le(out, set.dim);
  for (float v : set.data) append_u32_le(out, std::bit_cast<std::uint32_t>(v));
  for (const auto& id : set.ids) {
    out += id;
    out.push_back('\n');
  }
  return out;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  tsv::write_file(path, serialize_embeddings(set));
}

EmbeddingSet normalize(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = out.row(i);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0)) throw Error(ErrorCode::ZeroNormRow, "row " + std::to_string(i));
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : row) v = static_cast<float>(v * inv);
  }
  out.normalized = true;
  return out;
}

Manifest parse_manifest(std::string_view text, std::string_view source) {
  const tsv::Table table = tsv::parse_table(text, source);
  const std::size_t image_col = table.require_column("image_id");
  const std::size_t identity_col = table.require_column("identity_id");
  const auto demographic_col = table.column_index("demographic");
  const auto age_col = table.column_index("age");
  const auto exposure_col = table.column_index("exposure");
  const auto path_col = table.column_index("image_path");

  Manifest manifest;
  std::vector<std::pair<std::size_t, std::string>> attr_cols;
  static const std::set<std::string, std::less<>> kKnown = {
      "image_id", "identity_id", "demographic", "age", "exposure", "image_path"};
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& name = table.columns[c];
    if (name.starts_with("attr:") && name.size() > 5) {
      attr_cols.emplace_back(c, name.substr(5));
      manifest.attribute_names.push_back(name.substr(5));
    } else if (!kKnown.contains(name)) {
      ++manifest.unknown_columns;
    }
  }
  std::sort(manifest.attribute_names.begin(), manifest.attribute_names.end());

  std::unordered_set<std::string> seen;
  manifest.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto where = [&](std::string_view column) {
      return std::string(source) + " line " + std::to_string(table.line_numbers[r]) + " column " +
             std::string(column);
    };
    auto fail = [&](std::string_view column, const std::string& detail) -> void {
      throw Error(ErrorCode::UnparsableField, where(column) + ": " + detail);
    };
    ImageRecord rec;
    rec.image_id = row[image_col];
    rec.identity_id = row[identity_col];
    if (rec.image_id.empty()) fail("image_id", "empty");
    if (rec.identity_id.empty()) fail("identity_id", "empty");
    if (!seen.insert(rec.image_id).second) {
      throw Error(ErrorCode::DuplicateImageId, where("image_id") + ": " + rec.image_id);
    }
    auto parse = [&](std::string_view column, auto&& fn) {
      try {
        return fn();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparsableField) throw;
        fail(column, e.what());
      }
      return decltype(fn())();
    };
    if (demographic_col && !row[*demographic_col].empty()) {
      rec.demographic = parse("demographic", [&] { return parse_demographic(row[*demographic_col]); });
    }
    if (age_col && !row[*age_col].empty()) {
      const auto age = parse("age", [&] { return tsv::parse_int(row[*age_col], "age"); });
      if (age < 0 || age > 200) fail("age", "out of range");
      rec.age = static_cast<int>(age);
    }
    if (exposure_col && !row[*exposure_col].empty()) {
      rec.exposure = parse("exposure", [&] { return tsv::parse_double(row[*exposure_col], "exposure"); });
    }
    for (const auto& [col, name] : attr_cols) {
      if (row[col].empty()) continue;
      const std::string column = "attr:" + name;
      const double conf = parse(column, [&] { return tsv::parse_double(row[col], column); });
      if (conf < 0.0 || conf > 1.0) fail(column, "confidence outside [0, 1]");
      rec.attributes.emplace(name, conf);
    }
    if (path_col && !row[*path_col].empty()) rec.image_path = row[*path_col];
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(tsv::read_file(path), path.string());
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out = "image_id\tidentity_id\tdemographic\tage\texposure\timage_path";
  for (const auto& name : manifest.attribute_names) out += "\tattr:" + name;
  out += '\n';
  for (const auto& rec : manifest.records) {
    std::vector<std::string> f;
    f.push_back(rec.image_id);
    f.push_back(rec.identity_id);
    f.emplace_back(to_string(rec.demographic));
    f.push_back(rec.age ? std::to_string(*rec.age) : "");
    f.push_back(rec.exposure ? tsv::format_shortest(*rec.exposure) : "");
    f.push_back(rec.image_path.value_or(""));
    for (const auto& name : manifest.attribute_names) {
      auto it = rec.attributes.find(name);
      f.push_back(it == rec.attributes.end() ? "" : tsv::format_shortest(it->second));
    }
    out += tsv::join(f);
    out += '\n';
  }
  return out;
}

Corpus::Corpus(EmbeddingSet embeddings, Manifest manifest)
    : embeddings_(std::move(embeddings)),
      records_(std::move(manifest.records)),
      attribute_names_(std::move(manifest.attribute_names)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    index_.emplace(records_[i].image_id, i);
    identities_[records_[i].identity_id].push_back(i);
  }
}

std::optional<std::size_t> Corpus::find(std::string_view image_id) const {
  auto it = index_.find(std::string(image_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(std::string_view image_id) const {
  if (auto i = find(image_id)) return *i;
  throw Error(ErrorCode::MissingEmbedding, "image '" + std::string(image_id) + "' not in corpus");
}

const ImageRecord& Corpus::record(std::string_view image_id) const {
  return records_[index_of(image_id)];
}

std::span<const float> Corpus::embedding(std::string_view image_id) const {
  return embeddings_.row(index_of(image_id));
}

Manifest Corpus::manifest() const {
  Manifest m;
  m.records = records_;
  m.attribute_names = attribute_names_;
  return m;
}

Corpus build_corpus(EmbeddingSet set, Manifest manifest) {
  if (!set.normalized) {
    throw Error(ErrorCode::NotNormalized, "build_corpus requires normalized embeddings");
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    by_id.emplace(manifest.records[i].image_id, i);
  }
  constexpr std::size_t kReportCap = 10;
  std::vector<std::string> only_embeddings;
  std::vector<std::string> only_manifest;
  std::unordered_set<std::string_view> embedding_ids;
  for (const auto& id : set.ids) {
    embedding_ids.insert(id);
    if (!by_id.contains(id)) only_embeddings.push_back(id);
  }
  for (const auto& rec : manifest.records) {
    if (!embedding_ids.contains(rec.image_id)) only_manifest.push_back(rec.image_id);
  }
  if (!only_embeddings.empty() || !only_manifest.empty()) {
    auto list = [&](const std::vector<std::string>& ids) {
      std::string s;
      for (std::size_t i = 0; i < ids.size() && i < kReportCap; ++i) s += (i ? "," : "") + ids[i];
      if (ids.size() > kReportCap) s += ",... (" + std::to_string(ids.size()) + " total)";
      return s;
    };
    throw Error(ErrorCode::IdMismatch, "embeddings only: [" + list(only_embeddings) +
                                           "]; manifest only: [" + list(only_manifest) + "]");
  }
  Manifest ordered;
  ordered.attribute_names = std::move(manifest.attribute_names);
  ordered.records.reserve(set.ids.size());
  for (const auto& id : set.ids) ordered.records.push_back(std::move(manifest.records[by_id.at(id)]));
  return Corpus(std::move(set), std::move(ordered));
}

Corpus load_corpus(const std::filesystem::path& embeddings, const std::filesystem::path& manifest) {
  return build_corpus(normalize(load_embeddings(embeddings)), load_manifest(manifest));
}

}  // namespace fvkit
