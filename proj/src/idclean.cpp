#include "fvkit/idclean.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "fvkit/error.hpp"
#include "fvkit/parallel.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

int ClusterLabeling::cluster_count() const {
  int max_label = kNoise;
  for (int l : labels) max_label = std::max(max_label, l);
  return max_label + 1;
}

std::vector<int> dbscan(std::span<const std::span<const float>> points, const DbscanParams& params) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "dbscan on zero points");
  if (!(params.eps > 0.0) || params.min_pts < 1) {
    throw Error(ErrorCode::InvalidPolicy, "dbscan requires eps > 0 and min_pts >= 1");
  }
  const std::size_t n = points.size();
  // Identities hold at most a few hundred images, so a dense neighbour table
  // is cheaper than any index.
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbours[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (1.0 - cosine(points[i], points[j]) <= params.eps) {
        neighbours[i].push_back(j);
        neighbours[j].push_back(i);
      }
    }
  }
  for (auto& nb : neighbours) std::sort(nb.begin(), nb.end());

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    if (neighbours[i].size() < params.min_pts) {
      labels[i] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    labels[i] = cluster;
    std::deque<std::size_t> frontier(neighbours[i].begin(), neighbours[i].end());
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      if (labels[p] == kNoise) labels[p] = cluster;  // border point
      if (labels[p] != kUnvisited) continue;
      labels[p] = cluster;
      if (neighbours[p].size() >= params.min_pts) {
        frontier.insert(frontier.end(), neighbours[p].begin(), neighbours[p].end());
      }
    }
  }
  return labels;
}

ClusterLabeling dbscan(const Corpus& corpus, std::span<const std::size_t> rows, const DbscanParams& params) {
  std::vector<std::span<const float>> points;
  ClusterLabeling out;
  points.reserve(rows.size());
  for (std::size_t r : rows) {
    points.push_back(corpus.embeddings().row(r));
    out.image_ids.push_back(corpus.records()[r].image_id);
  }
  out.labels = dbscan(points, params);
  out.eps = params.eps;
  out.min_pts = params.min_pts;
  return out;
}

CleanResult majority_filter(const Corpus& corpus, const std::string& identity_id, const DbscanParams& params) {
  auto it = corpus.identities().find(identity_id);
  if (it == corpus.identities().end()) {
    throw Error(ErrorCode::UnknownIdentity, identity_id);
  }
  const ClusterLabeling labeling = dbscan(corpus, it->second, params);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(labeling.cluster_count()), 0);
  for (int l : labeling.labels) {
    if (l != kNoise) ++sizes[static_cast<std::size_t>(l)];
  }
  int keep = kNoise;
  std::size_t best = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] > best) {
      best = sizes[c];
      keep = static_cast<int>(c);
    }
  }
  CleanResult result;
  result.identity_id = identity_id;
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    auto& bucket = (keep != kNoise && labeling.labels[i] == keep) ? result.retained : result.removed;
    bucket.push_back(labeling.image_ids[i]);
  }
  return result;
}

std::vector<CleanResult> clean_identities(const Corpus& corpus, std::vector<std::string> identity_ids,
                                          const DbscanParams& params, unsigned threads) {
  if (identity_ids.empty()) {
    for (const auto& [id, rows] : corpus.identities()) identity_ids.push_back(id);
  }
  std::sort(identity_ids.begin(), identity_ids.end());
  identity_ids.erase(std::unique(identity_ids.begin(), identity_ids.end()), identity_ids.end());
  std::vector<CleanResult> results(identity_ids.size());
  parallel_for(identity_ids.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) results[i] = majority_filter(corpus, identity_ids[i], params);
  });
  return results;
}

std::string serialize_clean_report(const std::vector<CleanResult>& results) {
  std::string out = "identity_id\tn_before\tn_after\tremoved\n";
  for (const auto& r : results) {
    std::string removed;
    for (std::size_t i = 0; i < r.removed.size(); ++i) removed += (i ? ";" : "") + r.removed[i];
    out += r.identity_id + '\t' + std::to_string(r.retained.size() + r.removed.size()) + '\t' +
           std::to_string(r.retained.size()) + '\t' + removed + '\n';
  }
  return out;
}

std::vector<CleanResult> parse_clean_report(std::string_view text, std::string_view source) {
  const auto table = tsv::parse_table(text, source);
  const auto id_col = table.require_column("identity_id");
  const auto before_col = table.require_column("n_before");
  const auto after_col = table.require_column("n_after");
  const auto removed_col = table.require_column("removed");
  std::vector<CleanResult> out;
  for (const auto& row : table.rows) {
    CleanResult r;
    r.identity_id = row[id_col];
    if (!row[removed_col].empty()) r.removed = tsv::split(row[removed_col], ';');
    const auto before = tsv::parse_int(row[before_col], "n_before");
    const auto after = tsv::parse_int(row[after_col], "n_after");
    if (before - after != static_cast<std::int64_t>(r.removed.size())) {
      throw Error(ErrorCode::UnparsableField,
                  std::string(source) + ": removed list disagrees with counts for " + r.identity_id);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fvkit
