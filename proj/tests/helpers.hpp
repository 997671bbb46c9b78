#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "fvkit/corpus.hpp"
#include "fvkit/random.hpp"

namespace testutil {

inline std::vector<float> random_unit(fvkit::Rng& rng, std::uint32_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  std::vector<float> out(dim);
  for (std::uint32_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / std::sqrt(sq));
  return out;
}

inline fvkit::EmbeddingSet make_set(const std::vector<std::string>& ids, const std::vector<std::vector<float>>& rows) {
  fvkit::EmbeddingSet set;
  set.ids = ids;
  set.dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
  for (const auto& r : rows) set.data.insert(set.data.end(), r.begin(), r.end());
  set.normalized = true;
  return set;
}

// Random unit rows with ids "<prefix><number>" in shuffled order so that
// corpus order and id order disagree.
inline fvkit::EmbeddingSet random_set(fvkit::Rng& rng, std::size_t n, std::uint32_t dim, const std::string& prefix) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  rng.shuffle(ids);
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(random_unit(rng, dim));
  return make_set(ids, rows);
}

struct Image {
  std::string image_id;
  std::string identity_id;
  std::vector<float> embedding;
};

inline fvkit::Corpus make_corpus(const std::vector<Image>& images, fvkit::Manifest manifest = {}) {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> rows;
  const bool fill = manifest.records.empty();
  for (const auto& im : images) {
    ids.push_back(im.image_id);
    rows.push_back(im.embedding);
    if (fill) manifest.records.push_back({im.image_id, im.identity_id});
  }
  return fvkit::build_corpus(make_set(ids, rows), std::move(manifest));
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fvkit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil


#define CHECK_THROWS_CODE(expr, expected)                                  \
  do {                                                                     \
    try {                                                                  \
      (void)(expr);                                                        \
      FAIL_CHECK("expected fvkit::Error " << fvkit::to_string(expected));  \
    } catch (const fvkit::Error& e_) {                                     \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());                   \
    }                                                                      \
  } while (0)
