#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fvkit/corpus.hpp"

namespace fvkit {

// Dot product and squared distance, accumulated in double over a fixed set of
// eight interleaved partial sums. The summation order depends only on dim, so
// scores are identical whatever the caller's threading or the target's SIMD
// width.
double dot(std::span<const float> a, std::span<const float> b);
double squared_euclidean(std::span<const float> a, std::span<const float> b);

// Cosine of two unit vectors. Throws DimMismatch.
double cosine(std::span<const float> a, std::span<const float> b);

struct SimilarityHit {
  std::string test_image_id;
  std::string train_image_id;
  float score = 0.0f;
  int rank = 0;
};

// Hits for one test image, rank 1 first.
struct TestHits {
  std::string test_image_id;
  std::vector<SimilarityHit> hits;
};

struct SearchOptions {
  std::size_t k = 2;
  unsigned threads = 1;
};

// Exact top-k train neighbours of every test row, in test-corpus order. Scores
// are the float-rounded cosine; ties go to the lexicographically smaller train
// id. Throws DimMismatch, KTooLarge (also for k = 0).
std::vector<TestHits> top_k_cross(const EmbeddingSet& test, const EmbeddingSet& train,
                                  const SearchOptions& options = {});
std::vector<TestHits> top_k_cross(const Corpus& test, const Corpus& train,
                                  const SearchOptions& options = {});

std::vector<SimilarityHit> flatten(const std::vector<TestHits>& hits);

// test_image_id, rank, train_image_id, score (6 decimals).
std::string serialize_hits(const std::vector<SimilarityHit>& hits);
std::vector<SimilarityHit> parse_hits(std::string_view text, std::string_view source = "<memory>");

struct Quantile {
  double p = 0.0;
  double value = 0.0;
};

struct DistributionSummary {
  std::vector<double> band_edges;
  // band_counts[0] counts scores below band_edges[0]; band_counts[i] counts
  // [edge[i-1], edge[i]); the last entry counts scores >= the last edge.
  std::vector<std::size_t> band_counts;
  std::vector<Quantile> quantiles;
  std::size_t total = 0;
};

inline const std::vector<double> kDefaultBandEdges = {0.5, 0.7, 0.9};
inline const std::vector<double> kSummaryQuantiles = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

// Nearest-rank quantiles. Throws EmptyInput.
DistributionSummary summarize(std::span<const float> scores,
                              const std::vector<double>& band_edges = kDefaultBandEdges);
DistributionSummary summarize(const std::vector<SimilarityHit>& hits,
                              const std::vector<double>& band_edges = kDefaultBandEdges);

std::string format_summary_table(const DistributionSummary& summary);
std::string format_summary_kv(const DistributionSummary& summary);

}  // namespace fvkit
