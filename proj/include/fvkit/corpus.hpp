#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fvkit {

enum class Demographic { AAM, AAF, CM, CF, OTHER };

std::string_view to_string(Demographic d);
// Accepts the canonical upper-case names; throws UnparsableField otherwise.
Demographic parse_demographic(std::string_view text);
inline constexpr Demographic kAllDemographics[] = {Demographic::AAM, Demographic::AAF,
                                                   Demographic::CM, Demographic::CF,
                                                   Demographic::OTHER};

// Dense n x dim row-major float matrix keyed by image id.
struct EmbeddingSet {
  std::vector<std::string> ids;
  std::uint32_t dim = 0;
  std::vector<float> data;
  bool normalized = false;

  std::size_t size() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

// EMB1 layout: "EMB1", u32 n, u32 dim (little-endian), n*dim f32 LE row-major,
// then n '\n'-terminated UTF-8 image ids.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
EmbeddingSet parse_embeddings(std::string_view bytes);
std::string serialize_embeddings(const EmbeddingSet& set);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// Row-wise L2 normalization computed in double. Already-normalized input is
// renormalized, which is a no-op up to float rounding.
EmbeddingSet normalize(const EmbeddingSet& set);

struct ImageRecord {
  std::string image_id;
  std::string identity_id;
  Demographic demographic = Demographic::OTHER;
  std::optional<int> age;
  std::map<std::string, double> attributes;
  std::optional<double> exposure;
  std::optional<std::string> image_path;
};

struct Manifest {
  std::vector<ImageRecord> records;
  // attr:<name> columns declared by the source, sorted.
  std::vector<std::string> attribute_names;
  std::size_t unknown_columns = 0;
};

Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, std::string_view source = "<memory>");
// Writes the canonical column order: image_id, identity_id, demographic, age,
// exposure, image_path, attr:<name>... Absent values are blank.
std::string serialize_manifest(const Manifest& manifest);

// Immutable join of embeddings and manifest. Row i of `embeddings` describes
// `records[i]`.
class Corpus {
 public:
  Corpus(EmbeddingSet embeddings, Manifest manifest);

  const EmbeddingSet& embeddings() const { return embeddings_; }
  const std::vector<ImageRecord>& records() const { return records_; }
  const std::vector<std::string>& attribute_names() const { return attribute_names_; }
  std::size_t size() const { return records_.size(); }

  // Row index of an image, or nullopt.
  std::optional<std::size_t> find(std::string_view image_id) const;
  std::size_t index_of(std::string_view image_id) const;  // throws MissingEmbedding
  const ImageRecord& record(std::string_view image_id) const;
  std::span<const float> embedding(std::string_view image_id) const;

  // identity_id -> row indices in corpus order.
  const std::map<std::string, std::vector<std::size_t>>& identities() const { return identities_; }
  Manifest manifest() const;

 private:
  EmbeddingSet embeddings_;
  std::vector<ImageRecord> records_;
  std::vector<std::string> attribute_names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::size_t>> identities_;
};

// Requires a normalized set; IdMismatch lists (up to 10) ids present on one
// side only. Records are reordered to embedding order.
Corpus build_corpus(EmbeddingSet set, Manifest manifest);

// Convenience: load, normalize, join.
Corpus load_corpus(const std::filesystem::path& embeddings, const std::filesystem::path& manifest);

}  // namespace fvkit
