#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fvkit/annotation.hpp"
#include "fvkit/corpus.hpp"
#include "fvkit/idclean.hpp"
#include "fvkit/simsearch.hpp"

namespace fvkit {

struct ThresholdPolicy {
  double tau_auto = 0.5;
  double tau_id = 0.7;
  double tau_dup = 0.9;

  // Throws InvalidPolicy unless 0 < tau_auto <= tau_id <= tau_dup <= 1.
  void validate() const;
};

enum class Band { Below, CandidateIdentity, CandidateDuplicate };

std::string_view to_string(Band band);
Band parse_band(std::string_view text);

std::string make_pair_id(std::string_view test_image_id, std::string_view train_image_id);

struct Candidate {
  std::string pair_id;
  std::string test_image_id;
  std::string train_image_id;
  float score = 0.0f;
  Band band = Band::Below;
  // Identity candidate in [tau_auto, tau_id).
  bool low_confidence = false;
  std::string test_image_path;
  std::string train_image_path;
};

Band classify_score(float score, const ThresholdPolicy& policy);

// One candidate per hit, in hit order. Throws UnparsableField for ids that
// contain '|' (the pair-id separator) and for scores outside [-1, 1].
std::vector<Candidate> classify_hits(const std::vector<SimilarityHit>& hits, const ThresholdPolicy& policy);

// Fills image paths from the two manifests (blank when absent or unknown).
void attach_image_paths(std::vector<Candidate>& candidates, const Manifest& test, const Manifest& train);

// pair_id, score, band, test_image_path, train_image_path.
std::string serialize_candidates(const std::vector<Candidate>& candidates);
std::vector<Candidate> parse_candidates(std::string_view text, const ThresholdPolicy& policy,
                                        std::string_view source = "<memory>");

struct ReconcileOptions {
  // Lets the newest decision win when annotators disagree, even if the log
  // record itself carries no override flag.
  bool allow_override = false;
};

struct ConfirmedOverlap {
  std::vector<std::string> identity_pairs;   // same identity (includes duplicates)
  std::vector<std::string> duplicate_pairs;  // same identity and same image
  std::vector<std::string> different_pairs;
  std::vector<std::string> unsure_pairs;     // reviewed but excluded
  std::vector<std::string> pending_pairs;    // unreviewed, score >= tau_auto
  std::map<std::string, AnnotationRecord> decisions;
};

// Resolves the annotation history of every candidate. Throws UnknownPairId and
// ConflictingAnnotations (two annotators disagree and the later record has no
// override).
ConfirmedOverlap apply_annotations(const std::vector<Candidate>& candidates,
                                   const std::vector<AnnotationRecord>& annotations,
                                   const ReconcileOptions& options = {});

struct IdentityMatch {
  std::string test_identity;
  std::string train_identity;
  auto operator<=>(const IdentityMatch&) const = default;
};

// Distinct (test identity, train identity) pairs behind confirmed identity
// overlaps, sorted.
std::vector<IdentityMatch> confirmed_matches(const ConfirmedOverlap& confirmed, const Manifest& test,
                                             const Manifest& train);

std::string serialize_matches(const std::vector<IdentityMatch>& matches);
std::vector<IdentityMatch> parse_matches(std::string_view text, std::string_view source = "<memory>");

struct OverlapReport {
  std::size_t n_test_images = 0;
  std::size_t n_test_identities = 0;
  std::size_t n_test_images_overlapped = 0;      // confirmed duplicates
  std::size_t n_test_identities_overlapped = 0;  // confirmed identity overlaps
  std::size_t n_train_identities_matched = 0;
  std::size_t n_pending = 0;
  std::size_t n_unsure = 0;

  double image_fraction() const;
  double identity_fraction() const;
};

// Image overlap counts confirmed duplicates; identity overlap counts any
// confirmed same-identity pair.
OverlapReport overlap_stats(const ConfirmedOverlap& confirmed, const Manifest& test, const Manifest& train);

// 100 * numerator / denominator with two decimals and a '%' sign.
std::string format_percent(std::size_t numerator, std::size_t denominator);
std::string format_overlap_report(const OverlapReport& report);

// Connected components of the bipartite test/train match graph, reported as
// sets of train identities. Members are sorted and groups are ordered by their
// smallest member.
std::vector<std::vector<std::string>> merge_identities(const std::vector<IdentityMatch>& matches);

enum class VariantKind { IdDisjoint, IdOverlapR, IdOverlapC };

std::string_view to_string(VariantKind kind);
VariantKind parse_variant_kind(std::string_view text);

struct VariantSpec {
  VariantKind kind = VariantKind::IdDisjoint;
  std::uint64_t seed = 0;
};

struct Variant {
  VariantSpec spec;
  Manifest manifest;
  std::vector<std::string> removed_identities;
  std::vector<std::string> removed_images;  // dropped by cleaning (ID_OVERLAP_C only)
  std::vector<std::vector<std::string>> merged_groups;
};

Variant build_variant(const Manifest& train, const std::vector<IdentityMatch>& matches,
                      const std::vector<CleanResult>& clean_results, const VariantSpec& spec);

std::string serialize_variant_diff(const Variant& variant);

}  // namespace fvkit
