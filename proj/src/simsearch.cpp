#include "fvkit/simsearch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fvkit/error.hpp"
#include "fvkit/parallel.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

namespace {

constexpr std::size_t kLanes = 8;

double reduce_lanes(const double (&acc)[kLanes]) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

double dot_unchecked(const float* a, const float* b, std::size_t dim) {
  double acc[kLanes] = {};
  std::size_t j = 0;
  for (; j + kLanes <= dim; j += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] += static_cast<double>(a[j + l]) * static_cast<double>(b[j + l]);
    }
  }
  for (std::size_t l = 0; j < dim; ++j, ++l) acc[l] += static_cast<double>(a[j]) * b[j];
  return reduce_lanes(acc);
}

void check_dims(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::DimMismatch, std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Ordering of candidate neighbours: higher score first, then lower id rank.
struct Candidate {
  float score;
  std::uint32_t id_rank;
  std::uint32_t row;
};

inline bool better(const Candidate& x, const Candidate& y) {
  if (x.score != y.score) return x.score > y.score;
  return x.id_rank < y.id_rank;
}

// Keeps the k best candidates sorted best-first.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void clear() { items_.clear(); }

  void offer(const Candidate& c) {
    if (items_.size() == k_ && !better(c, items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), c,
                                [](const Candidate& a, const Candidate& b) { return better(a, b); });
    items_.insert(pos, c);
    if (items_.size() > k_) items_.pop_back();
  }

  const std::vector<Candidate>& items() const { return items_; }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
};

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) {
  check_dims(a.size(), b.size());
  return dot_unchecked(a.data(), b.data(), a.size());
}

double squared_euclidean(std::span<const float> a, std::span<const float> b) {
  check_dims(a.size(), b.size());
  double acc[kLanes] = {};
  const std::size_t dim = a.size();
  std::size_t j = 0;
  for (; j + kLanes <= dim; j += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double d = static_cast<double>(a[j + l]) - static_cast<double>(b[j + l]);
      acc[l] += d * d;
    }
  }
  for (std::size_t l = 0; j < dim; ++j, ++l) {
    const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    acc[l] += d * d;
  }
  return reduce_lanes(acc);
}

double cosine(std::span<const float> a, std::span<const float> b) { return dot(a, b); }

std::vector<TestHits> top_k_cross(const EmbeddingSet& test, const EmbeddingSet& train,
                                  const SearchOptions& options) {
  check_dims(test.dim, train.dim);
  if (options.k == 0 || options.k > train.size()) {
    throw Error(ErrorCode::KTooLarge,
                "k = " + std::to_string(options.k) + " with " + std::to_string(train.size()) +
                    " train images");
  }
  const std::size_t dim = train.dim;
  const std::size_t n_train = train.size();

  // Rank of each train id in lexicographic order, so ties compare integers.
  std::vector<std::uint32_t> order(n_train);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return train.ids[a] < train.ids[b]; });
  std::vector<std::uint32_t> id_rank(n_train);
  for (std::uint32_t r = 0; r < n_train; ++r) id_rank[order[r]] = r;

  std::vector<TestHits> out(test.size());
  // Test rows are processed in small blocks so each train row is streamed once
  // per block instead of once per test row.
  constexpr std::size_t kBlock = 4;
  parallel_for(test.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<TopK> heaps(kBlock, TopK(options.k));
    for (std::size_t b0 = begin; b0 < end; b0 += kBlock) {
      const std::size_t b1 = std::min(end, b0 + kBlock);
      for (auto& h : heaps) h.clear();
      for (std::size_t t = 0; t < n_train; ++t) {
        const float* train_row = train.data.data() + t * dim;
        for (std::size_t q = b0; q < b1; ++q) {
          const float s = static_cast<float>(dot_unchecked(test.data.data() + q * dim, train_row, dim));
          heaps[q - b0].offer({s, id_rank[t], static_cast<std::uint32_t>(t)});
        }
      }
      for (std::size_t q = b0; q < b1; ++q) {
        TestHits& th = out[q];
        th.test_image_id = test.ids[q];
        int rank = 1;
        for (const Candidate& c : heaps[q - b0].items()) {
          th.hits.push_back({test.ids[q], train.ids[c.row], c.score, rank++});
        }
      }
    }
  });
  return out;
}

std::vector<TestHits> top_k_cross(const Corpus& test, const Corpus& train, const SearchOptions& options) {
  return top_k_cross(test.embeddings(), train.embeddings(), options);
}

std::vector<SimilarityHit> flatten(const std::vector<TestHits>& hits) {
  std::vector<SimilarityHit> out;
  for (const auto& th : hits) out.insert(out.end(), th.hits.begin(), th.hits.end());
  return out;
}

std::string serialize_hits(const std::vector<SimilarityHit>& hits) {
  std::string out = "test_image_id\trank\ttrain_image_id\tscore\n";
  for (const auto& h : hits) {
    out += h.test_image_id + '\t' + std::to_string(h.rank) + '\t' + h.train_image_id + '\t' +
           tsv::format_fixed(h.score, 6) + '\n';
  }
  return out;
}

std::vector<SimilarityHit> parse_hits(std::string_view text, std::string_view source) {
  const auto table = tsv::parse_table(text, source);
  const auto test_col = table.require_column("test_image_id");
  const auto rank_col = table.require_column("rank");
  const auto train_col = table.require_column("train_image_id");
  const auto score_col = table.require_column("score");
  std::vector<SimilarityHit> hits;
  hits.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    SimilarityHit h;
    h.test_image_id = row[test_col];
    h.train_image_id = row[train_col];
    h.rank = static_cast<int>(tsv::parse_int(row[rank_col], "rank"));
    h.score = static_cast<float>(tsv::parse_double(row[score_col], "score"));
    if (h.rank < 1) throw Error(ErrorCode::UnparsableField, "rank must be >= 1");
    if (h.score < -1.0f - 1e-6f || h.score > 1.0f + 1e-6f) {
      throw Error(ErrorCode::UnparsableField, "score outside [-1, 1]");
    }
    hits.push_back(std::move(h));
  }
  return hits;
}

DistributionSummary summarize(std::span<const float> scores, const std::vector<double>& band_edges) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no scores to summarize");
  if (!std::is_sorted(band_edges.begin(), band_edges.end())) {
    throw Error(ErrorCode::InvalidPolicy, "band edges must be sorted");
  }
  DistributionSummary s;
  s.band_edges = band_edges;
  s.band_counts.assign(band_edges.size() + 1, 0);
  s.total = scores.size();
  // Thresholds are compared at float precision, like the scores themselves.
  const std::vector<float> edges(band_edges.begin(), band_edges.end());
  for (float v : scores) {
    const auto band = std::upper_bound(edges.begin(), edges.end(), v) - edges.begin();
    ++s.band_counts[static_cast<std::size_t>(band)];
  }
  std::vector<float> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (double p : kSummaryQuantiles) {
    // Nearest rank: smallest value with at least p*n values at or below it.
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    s.quantiles.push_back({p, static_cast<double>(sorted[rank - 1])});
  }
  return s;
}

DistributionSummary summarize(const std::vector<SimilarityHit>& hits, const std::vector<double>& band_edges) {
  std::vector<float> scores;
  scores.reserve(hits.size());
  for (const auto& h : hits) scores.push_back(h.score);
  return summarize(scores, band_edges);
}

namespace {

std::vector<std::string> band_labels(const std::vector<double>& edges) {
  std::vector<std::string> labels;
  labels.push_back("<" + tsv::format_shortest(edges.empty() ? 0.0 : edges.front()));
  for (std::size_t i = 1; i < edges.size(); ++i) {
    labels.push_back("[" + tsv::format_shortest(edges[i - 1]) + "," + tsv::format_shortest(edges[i]) + ")");
  }
  if (!edges.empty()) labels.push_back(">=" + tsv::format_shortest(edges.back()));
  return labels;
}

}  // namespace

std::string format_summary_table(const DistributionSummary& s) {
  std::string out = "band\tcount\tfraction\n";
  const auto labels = band_labels(s.band_edges);
  for (std::size_t i = 0; i < s.band_counts.size(); ++i) {
    out += labels[i] + '\t' + std::to_string(s.band_counts[i]) + '\t' +
           tsv::format_fixed(static_cast<double>(s.band_counts[i]) / static_cast<double>(s.total), 4) + '\n';
  }
  out += "total\t" + std::to_string(s.total) + "\t1.0000\n";
  out += "\nquantile\tscore\n";
  for (const auto& q : s.quantiles) {
    out += "p" + tsv::format_fixed(q.p * 100.0, 0) + '\t' + tsv::format_fixed(q.value, 6) + '\n';
  }
  return out;
}

std::string format_summary_kv(const DistributionSummary& s) {
  std::string out = "total=" + std::to_string(s.total) + '\n';
  for (std::size_t i = 0; i < s.band_edges.size(); ++i) {
    out += "edge." + std::to_string(i) + '=' + tsv::format_shortest(s.band_edges[i]) + '\n';
  }
  for (std::size_t i = 0; i < s.band_counts.size(); ++i) {
    out += "band." + std::to_string(i) + ".count=" + std::to_string(s.band_counts[i]) + '\n';
  }
  for (const auto& q : s.quantiles) {
    out += "quantile." + tsv::format_shortest(q.p) + '=' + tsv::format_shortest(q.value) + '\n';
  }
  return out;
}

}  // namespace fvkit
