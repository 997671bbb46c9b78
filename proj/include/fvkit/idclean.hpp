#pragma once

#include <span>
#include <string>
#include <vector>

#include "fvkit/corpus.hpp"

namespace fvkit {

inline constexpr int kNoise = -1;

struct DbscanParams {
  // Radius in cosine distance (1 - cosine). 0.3 corresponds to similarity 0.7.
  double eps = 0.3;
  std::size_t min_pts = 3;
};

struct ClusterLabeling {
  std::vector<std::string> image_ids;
  std::vector<int> labels;
  double eps = 0.0;
  std::size_t min_pts = 0;

  int cluster_count() const;
};

// DBSCAN over unit vectors with distance 1 - cosine. A point's neighbourhood
// includes itself and every point at distance <= eps; a point is core when its
// neighbourhood holds at least min_pts points. Points are scanned in input
// order, so cluster ids follow the first core point of each cluster and a
// border point joins the lowest-numbered cluster that reaches it.
std::vector<int> dbscan(std::span<const std::span<const float>> points, const DbscanParams& params);
ClusterLabeling dbscan(const Corpus& corpus, std::span<const std::size_t> rows, const DbscanParams& params);

struct CleanResult {
  std::string identity_id;
  std::vector<std::string> retained;
  std::vector<std::string> removed;
};

// Keeps the largest cluster of one identity (ties: smaller cluster id); noise
// and every other cluster are removed. Throws UnknownIdentity.
CleanResult majority_filter(const Corpus& corpus, const std::string& identity_id,
                            const DbscanParams& params);

// Cleans each listed identity (all identities when `identity_ids` is empty),
// in parallel. Output follows identity-id order.
std::vector<CleanResult> clean_identities(const Corpus& corpus, std::vector<std::string> identity_ids,
                                          const DbscanParams& params, unsigned threads = 1);

// identity_id, n_before, n_after, removed (semicolon-joined).
std::string serialize_clean_report(const std::vector<CleanResult>& results);
std::vector<CleanResult> parse_clean_report(std::string_view text, std::string_view source = "<memory>");

}  // namespace fvkit
