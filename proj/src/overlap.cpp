#include "fvkit/overlap.hpp"

#include <algorithm>
#include <numeric>

#include "fvkit/error.hpp"
#include "fvkit/random.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

void ThresholdPolicy::validate() const {
  if (!(0.0 < tau_auto && tau_auto <= tau_id && tau_id <= tau_dup && tau_dup <= 1.0)) {
    throw Error(ErrorCode::InvalidPolicy, "thresholds must satisfy 0 < tau_auto <= tau_id <= tau_dup <= 1");
  }
}

std::string_view to_string(Band band) {
  switch (band) {
    case Band::Below: return "below";
    case Band::CandidateIdentity: return "candidate_identity";
    case Band::CandidateDuplicate: return "candidate_duplicate";
  }
  return "below";
}

Band parse_band(std::string_view text) {
  for (Band b : {Band::Below, Band::CandidateIdentity, Band::CandidateDuplicate}) {
    if (to_string(b) == text) return b;
  }
  throw Error(ErrorCode::UnparsableField, "unknown band '" + std::string(text) + "'");
}

std::string make_pair_id(std::string_view test_image_id, std::string_view train_image_id) {
  std::string id;
  id.reserve(test_image_id.size() + train_image_id.size() + 1);
  id += test_image_id;
  id += '|';
  id += train_image_id;
  return id;
}

Band classify_score(float score, const ThresholdPolicy& policy) {
  if (score >= static_cast<float>(policy.tau_dup)) return Band::CandidateDuplicate;
  if (score >= static_cast<float>(policy.tau_auto)) return Band::CandidateIdentity;
  return Band::Below;
}

std::vector<Candidate> classify_hits(const std::vector<SimilarityHit>& hits, const ThresholdPolicy& policy) {
  policy.validate();
  std::vector<Candidate> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    if (h.test_image_id.find('|') != std::string::npos || h.train_image_id.find('|') != std::string::npos) {
      throw Error(ErrorCode::UnparsableField, "image id contains '|': " + h.test_image_id);
    }
    if (!(h.score >= -1.0f - 1e-6f && h.score <= 1.0f + 1e-6f)) {
      throw Error(ErrorCode::UnparsableField, "score outside [-1, 1] for " + h.test_image_id);
    }
    Candidate c;
    c.pair_id = make_pair_id(h.test_image_id, h.train_image_id);
    c.test_image_id = h.test_image_id;
    c.train_image_id = h.train_image_id;
    c.score = h.score;
    c.band = classify_score(h.score, policy);
    c.low_confidence = c.band == Band::CandidateIdentity && h.score < static_cast<float>(policy.tau_id);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::unordered_map<std::string, const ImageRecord*> index_records(const Manifest& m) {
  std::unordered_map<std::string, const ImageRecord*> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) out.emplace(r.image_id, &r);
  return out;
}

const ImageRecord& lookup(const std::unordered_map<std::string, const ImageRecord*>& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw Error(ErrorCode::IdMismatch, "image '" + id + "' not in manifest");
  return *it->second;
}

}  // namespace

void attach_image_paths(std::vector<Candidate>& candidates, const Manifest& test, const Manifest& train) {
  const auto test_index = index_records(test);
  const auto train_index = index_records(train);
  for (auto& c : candidates) {
    if (auto it = test_index.find(c.test_image_id); it != test_index.end()) {
      c.test_image_path = it->second->image_path.value_or("");
    }
    if (auto it = train_index.find(c.train_image_id); it != train_index.end()) {
      c.train_image_path = it->second->image_path.value_or("");
    }
  }
}

std::string serialize_candidates(const std::vector<Candidate>& candidates) {
  std::string out = "pair_id\tscore\tband\ttest_image_path\ttrain_image_path\n";
  for (const auto& c : candidates) {
    out += c.pair_id + '\t' + tsv::format_fixed(c.score, 6) + '\t' + std::string(to_string(c.band)) + '\t' +
           c.test_image_path + '\t' + c.train_image_path + '\n';
  }
  return out;
}

std::vector<Candidate> parse_candidates(std::string_view text, const ThresholdPolicy& policy,
                                        std::string_view source) {
  const auto table = tsv::parse_table(text, source);
  const auto pair_col = table.require_column("pair_id");
  const auto score_col = table.require_column("score");
  const auto band_col = table.require_column("band");
  const auto test_path_col = table.column_index("test_image_path");
  const auto train_path_col = table.column_index("train_image_path");
  std::vector<Candidate> out;
  for (const auto& row : table.rows) {
    Candidate c;
    c.pair_id = row[pair_col];
    const auto bar = c.pair_id.find('|');
    if (bar == std::string::npos || c.pair_id.find('|', bar + 1) != std::string::npos) {
      throw Error(ErrorCode::UnparsableField, std::string(source) + ": malformed pair id " + c.pair_id);
    }
    c.test_image_id = c.pair_id.substr(0, bar);
    c.train_image_id = c.pair_id.substr(bar + 1);
    c.score = static_cast<float>(tsv::parse_double(row[score_col], "score"));
    c.band = parse_band(row[band_col]);
    c.low_confidence = c.band == Band::CandidateIdentity && c.score < static_cast<float>(policy.tau_id);
    if (test_path_col) c.test_image_path = row[*test_path_col];
    if (train_path_col) c.train_image_path = row[*train_path_col];
    out.push_back(std::move(c));
  }
  return out;
}

ConfirmedOverlap apply_annotations(const std::vector<Candidate>& candidates,
                                   const std::vector<AnnotationRecord>& annotations,
                                   const ReconcileOptions& options) {
  std::map<std::string, const Candidate*> by_id;
  for (const auto& c : candidates) by_id.emplace(c.pair_id, &c);

  std::vector<std::size_t> order(annotations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return annotations[a].timestamp < annotations[b].timestamp;
  });

  ConfirmedOverlap out;
  for (std::size_t idx : order) {
    const AnnotationRecord& rec = annotations[idx];
    validate(rec);
    if (!by_id.contains(rec.pair_id)) throw Error(ErrorCode::UnknownPairId, rec.pair_id);
    auto [it, inserted] = out.decisions.try_emplace(rec.pair_id, rec);
    if (inserted) continue;
    AnnotationRecord& current = it->second;
    const bool conflict = current.annotator != rec.annotator && !current.same_decision(rec);
    if (conflict && !rec.override_conflict && !options.allow_override) {
      throw Error(ErrorCode::ConflictingAnnotations,
                  rec.pair_id + ": '" + current.annotator + "' said " + std::string(to_string(current.same_identity)) +
                      ", '" + rec.annotator + "' said " + std::string(to_string(rec.same_identity)));
    }
    current = rec;
  }

  for (const auto& c : candidates) {
    auto it = out.decisions.find(c.pair_id);
    if (it == out.decisions.end()) {
      if (c.band != Band::Below) out.pending_pairs.push_back(c.pair_id);
      continue;
    }
    switch (it->second.same_identity) {
      case SameIdentity::Same:
        out.identity_pairs.push_back(c.pair_id);
        if (it->second.same_image) out.duplicate_pairs.push_back(c.pair_id);
        break;
      case SameIdentity::Different: out.different_pairs.push_back(c.pair_id); break;
      case SameIdentity::Unsure: out.unsure_pairs.push_back(c.pair_id); break;
    }
  }
  for (auto* v : {&out.identity_pairs, &out.duplicate_pairs, &out.different_pairs, &out.unsure_pairs,
                  &out.pending_pairs}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return out;
}

namespace {

std::pair<std::string, std::string> split_pair_id(const std::string& pair_id) {
  const auto bar = pair_id.find('|');
  if (bar == std::string::npos) throw Error(ErrorCode::UnknownPairId, pair_id);
  return {pair_id.substr(0, bar), pair_id.substr(bar + 1)};
}

}  // namespace

std::vector<IdentityMatch> confirmed_matches(const ConfirmedOverlap& confirmed, const Manifest& test,
                                             const Manifest& train) {
  const auto test_index = index_records(test);
  const auto train_index = index_records(train);
  std::set<IdentityMatch> matches;
  for (const auto& pair_id : confirmed.identity_pairs) {
    const auto [test_image, train_image] = split_pair_id(pair_id);
    matches.insert({lookup(test_index, test_image).identity_id, lookup(train_index, train_image).identity_id});
  }
  return {matches.begin(), matches.end()};
}

std::string serialize_matches(const std::vector<IdentityMatch>& matches) {
  std::string out = "test_identity\ttrain_identity\n";
  for (const auto& m : matches) out += m.test_identity + '\t' + m.train_identity + '\n';
  return out;
}

std::vector<IdentityMatch> parse_matches(std::string_view text, std::string_view source) {
  const auto table = tsv::parse_table(text, source);
  const auto test_col = table.require_column("test_identity");
  const auto train_col = table.require_column("train_identity");
  std::vector<IdentityMatch> out;
  for (const auto& row : table.rows) out.push_back({row[test_col], row[train_col]});
  return out;
}

double OverlapReport::image_fraction() const {
  return n_test_images ? static_cast<double>(n_test_images_overlapped) / static_cast<double>(n_test_images) : 0.0;
}

double OverlapReport::identity_fraction() const {
  return n_test_identities
             ? static_cast<double>(n_test_identities_overlapped) / static_cast<double>(n_test_identities)
             : 0.0;
}

OverlapReport overlap_stats(const ConfirmedOverlap& confirmed, const Manifest& test, const Manifest& train) {
  OverlapReport r;
  r.n_test_images = test.records.size();
  std::set<std::string> all_test_identities;
  for (const auto& rec : test.records) all_test_identities.insert(rec.identity_id);
  r.n_test_identities = all_test_identities.size();
  const auto test_index = index_records(test);
  std::set<std::string> images;
  for (const auto& pair_id : confirmed.duplicate_pairs) {
    auto [test_image, train_image] = split_pair_id(pair_id);
    lookup(test_index, test_image);
    images.insert(std::move(test_image));
  }
  std::set<std::string> test_ids;
  std::set<std::string> train_ids;
  for (const auto& m : confirmed_matches(confirmed, test, train)) {
    test_ids.insert(m.test_identity);
    train_ids.insert(m.train_identity);
  }
  r.n_test_images_overlapped = images.size();
  r.n_test_identities_overlapped = test_ids.size();
  r.n_train_identities_matched = train_ids.size();
  r.n_pending = confirmed.pending_pairs.size();
  r.n_unsure = confirmed.unsure_pairs.size();
  return r;
}

std::string format_percent(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) return "n/a";
  // Integer arithmetic rounds half up without binary-fraction surprises.
  const std::uint64_t scaled = (static_cast<std::uint64_t>(numerator) * 20000u + denominator) /
                               (2u * static_cast<std::uint64_t>(denominator));
  std::string frac = std::to_string(scaled % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return std::to_string(scaled / 100) + "." + frac + "%";
}

std::string format_overlap_report(const OverlapReport& r) {
  std::string out;
  out += "test_images\t" + std::to_string(r.n_test_images) + '\n';
  out += "test_identities\t" + std::to_string(r.n_test_identities) + '\n';
  out += "overlapped_images\t" + std::to_string(r.n_test_images_overlapped) + '\t' +
         format_percent(r.n_test_images_overlapped, r.n_test_images) + '\n';
  out += "overlapped_identities\t" + std::to_string(r.n_test_identities_overlapped) + '\t' +
         format_percent(r.n_test_identities_overlapped, r.n_test_identities) + '\n';
  out += "matched_train_identities\t" + std::to_string(r.n_train_identities_matched) + '\n';
  out += "pending_pairs\t" + std::to_string(r.n_pending) + '\n';
  out += "unsure_pairs\t" + std::to_string(r.n_unsure) + '\n';
  return out;
}

namespace {

class DisjointSets {
 public:
  std::size_t add() {
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<std::vector<std::string>> merge_identities(const std::vector<IdentityMatch>& matches) {
  DisjointSets sets;
  std::map<std::string, std::size_t> test_node;
  std::map<std::string, std::size_t> train_node;
  auto node = [&](std::map<std::string, std::size_t>& nodes, const std::string& id) {
    auto [it, inserted] = nodes.try_emplace(id, 0);
    if (inserted) it->second = sets.add();
    return it->second;
  };
  for (const auto& m : matches) sets.unite(node(test_node, m.test_identity), node(train_node, m.train_identity));

  std::map<std::size_t, std::vector<std::string>> components;
  for (const auto& [id, n] : train_node) components[sets.find(n)].push_back(id);
  std::vector<std::vector<std::string>> groups;
  for (auto& [root, members] : components) groups.push_back(std::move(members));
  // Members come out of an ordered map already sorted.
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

std::string_view to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::IdDisjoint: return "ID_DISJOINT";
    case VariantKind::IdOverlapR: return "ID_OVERLAP_R";
    case VariantKind::IdOverlapC: return "ID_OVERLAP_C";
  }
  return "ID_DISJOINT";
}

VariantKind parse_variant_kind(std::string_view text) {
  for (VariantKind k : {VariantKind::IdDisjoint, VariantKind::IdOverlapR, VariantKind::IdOverlapC}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::UnparsableField, "unknown variant kind '" + std::string(text) + "'");
}

Variant build_variant(const Manifest& train, const std::vector<IdentityMatch>& matches,
                      const std::vector<CleanResult>& clean_results, const VariantSpec& spec) {
  std::set<std::string> all_identities;
  for (const auto& rec : train.records) all_identities.insert(rec.identity_id);
  std::set<std::string> overlapped;
  for (const auto& m : matches) {
    if (!all_identities.contains(m.train_identity)) throw Error(ErrorCode::UnknownIdentity, m.train_identity);
    overlapped.insert(m.train_identity);
  }

  Variant v;
  v.spec = spec;
  v.manifest.attribute_names = train.attribute_names;

  if (spec.kind == VariantKind::IdDisjoint) {
    v.removed_identities.assign(overlapped.begin(), overlapped.end());
  } else {
    std::vector<std::string> pool;
    for (const auto& id : all_identities) {
      if (!overlapped.contains(id)) pool.push_back(id);
    }
    if (pool.size() < overlapped.size()) {
      throw Error(ErrorCode::NotEnoughIdentities, "need " + std::to_string(overlapped.size()) +
                                                      " non-overlapped identities, have " +
                                                      std::to_string(pool.size()));
    }
    Rng rng(spec.seed);
    v.removed_identities = rng.sample(std::span<const std::string>(pool), overlapped.size());
    std::sort(v.removed_identities.begin(), v.removed_identities.end());
  }
  const std::set<std::string> removed(v.removed_identities.begin(), v.removed_identities.end());

  std::set<std::string> dropped_images;
  std::map<std::string, std::string> relabel;
  if (spec.kind == VariantKind::IdOverlapC) {
    for (const auto& r : clean_results) {
      if (!overlapped.contains(r.identity_id)) continue;
      dropped_images.insert(r.removed.begin(), r.removed.end());
    }
    v.merged_groups = merge_identities(matches);
    for (const auto& group : v.merged_groups) {
      for (std::size_t i = 1; i < group.size(); ++i) relabel.emplace(group[i], group.front());
    }
  }

  for (const auto& rec : train.records) {
    if (removed.contains(rec.identity_id)) continue;
    if (overlapped.contains(rec.identity_id) && dropped_images.contains(rec.image_id)) {
      v.removed_images.push_back(rec.image_id);
      continue;
    }
    ImageRecord out = rec;
    if (auto it = relabel.find(rec.identity_id); it != relabel.end()) out.identity_id = it->second;
    v.manifest.records.push_back(std::move(out));
  }
  return v;
}

std::string serialize_variant_diff(const Variant& v) {
  std::string out = "kind\t" + std::string(to_string(v.spec.kind)) + '\n';
  out += "seed\t" + std::to_string(v.spec.seed) + '\n';
  for (const auto& id : v.removed_identities) out += "removed_identity\t" + id + '\n';
  for (const auto& id : v.removed_images) out += "removed_image\t" + id + '\n';
  for (const auto& group : v.merged_groups) {
    if (group.size() < 2) continue;
    for (std::size_t i = 1; i < group.size(); ++i) out += "merge\t" + group[i] + '\t' + group.front() + '\n';
  }
  return out;
}

}  // namespace fvkit
