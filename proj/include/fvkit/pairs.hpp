#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fvkit/corpus.hpp"

namespace fvkit {

enum class PairLabel { Impostor = 0, Genuine = 1 };

struct VerificationPair {
  std::string image_a;
  std::string image_b;
  PairLabel label = PairLabel::Impostor;
  Demographic demographic = Demographic::OTHER;
  float score = 0.0f;  // cosine between the two embeddings
  std::string tag;     // e.g. "high-low", "low-low"
  std::optional<int> fold;
  // Looked up from the manifest; not part of the pair file.
  std::string identity_a;
  std::string identity_b;

  bool genuine() const { return label == PairLabel::Genuine; }
  // Larger is harder: low-scoring genuine pairs and high-scoring impostors.
  double difficulty() const { return genuine() ? -static_cast<double>(score) : static_cast<double>(score); }
  std::string pair_id() const { return image_a + "|" + image_b; }
};

// Hardest first, ties by pair id.
bool harder(const VerificationPair& a, const VerificationPair& b);

struct Targets {
  std::size_t genuine = 0;
  std::size_t impostor = 0;
};

struct SelectionPolicy {
  double tau_impostor_max = 0.7;
  double tau_genuine_min = 0.3;
  // Disabled when empty.
  std::optional<int> age_gap_max = 5;
  std::size_t occ_max_per_role = 3;
  double attr_conf_min = 0.9;
  std::map<Demographic, Targets> targets;

  void validate() const;
};

std::map<Demographic, Targets> hadrian_default_targets();
std::map<Demographic, Targets> eclipse_default_targets();

// attribute name -> required truth value.
using AttributePredicate = std::map<std::string, bool>;

// Images whose required-true attributes reach conf_min and whose
// required-false attributes are at most 1 - conf_min, in corpus order. Images
// lacking a referenced attribute value never qualify. Throws UnknownAttribute
// when the manifest has no such column.
std::vector<std::string> attribute_pool(const Corpus& corpus, const AttributePredicate& predicate, double conf_min);

struct ExposurePoolSpec {
  std::map<Demographic, double> tail_fraction = {
      {Demographic::AAM, 0.25}, {Demographic::AAF, 0.20}, {Demographic::CM, 0.20}, {Demographic::CF, 0.15}};
};

struct ExposurePools {
  std::vector<std::string> low;
  std::vector<std::string> high;
};

// Lowest and highest floor(fraction * n) images by exposure per demographic,
// ties by image id. Throws MissingExposure.
std::map<Demographic, ExposurePools> exposure_pools(const Corpus& corpus, const ExposurePoolSpec& spec);
std::map<Demographic, ExposurePools> exposure_pools(const Corpus& corpus, const ExposurePoolSpec& spec,
                                                    const std::vector<std::string>& candidates);

// Genuine pairs join two images of one identity, one from each pool.
struct GenuineRule {
  std::string tag;
  std::vector<std::string> pool_a;
  std::vector<std::string> pool_b;
};

// Impostor pairs join two images of different identities within one pool.
struct ImpostorRule {
  std::string tag;
  std::vector<std::string> pool;
};

// All candidate pairs of one demographic, scored. Pools are restricted to the
// demographic first; throws EmptyPool when a restricted pool is empty.
std::vector<VerificationPair> enumerate_candidates(const Corpus& corpus, const GenuineRule& genuine,
                                                   const std::vector<ImpostorRule>& impostors,
                                                   Demographic demographic);

// Similarity and age filters, then per-image occurrence caps applied greedily
// hardest first. Throws MissingAge when the age filter is on and a genuine
// pair lacks an age.
std::vector<VerificationPair> filter_candidates(const std::vector<VerificationPair>& pairs,
                                                const SelectionPolicy& policy, const Corpus& corpus);

struct TagCount {
  Demographic demographic;
  PairLabel label;
  std::string tag;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct FinalSelection {
  std::vector<VerificationPair> pairs;
  std::vector<TagCount> split;
};

// Per demographic and label, the `target` hardest pairs. When a cell holds
// several tags the quota is spread across them as evenly as their pools
// allow. Throws InsufficientCandidates.
FinalSelection select_final(const std::vector<VerificationPair>& pairs, const std::map<Demographic, Targets>& targets);

std::vector<VerificationPair> remove_rejected(std::vector<VerificationPair> pairs,
                                              const std::set<std::string>& rejected_pair_ids);

struct HadrianConfig {
  AttributePredicate no_facial_hair = {{"clean_shaven", true}, {"mustache", false}};
  AttributePredicate full_facial_hair = {{"full_beard", true}, {"mustache", true}};
};

struct EclipseConfig {
  ExposurePoolSpec pools;
  // Applied before the exposure split; empty disables it.
  AttributePredicate restrict_to = {{"clean_shaven", true}, {"mustache", false}};
};

struct PairBuild {
  std::size_t enumerated = 0;
  std::size_t filtered = 0;
  FinalSelection selection;
};

// Full facial-hair selection: enumerate, filter, drop rejected pairs, select.
// Demographics come from policy.targets.
PairBuild build_hadrian(const Corpus& corpus, const SelectionPolicy& policy, const HadrianConfig& config,
                        const std::set<std::string>& rejected = {}, unsigned threads = 1);
PairBuild build_eclipse(const Corpus& corpus, const SelectionPolicy& policy, const EclipseConfig& config,
                        const std::set<std::string>& rejected = {}, unsigned threads = 1);

// image_a, image_b, label (1 genuine / 0 impostor), demographic, score, tag, fold.
std::string serialize_pairs(const std::vector<VerificationPair>& pairs);
std::vector<VerificationPair> parse_pairs(std::string_view text, std::string_view source = "<memory>");
// Fills identity_a / identity_b; throws MissingEmbedding for unknown images.
void attach_identities(std::vector<VerificationPair>& pairs, const Corpus& corpus);

struct PairSetStats {
  std::size_t max_genuine_occurrence = 0;
  std::size_t max_impostor_occurrence = 0;
  std::size_t max_occurrence = 0;
};

PairSetStats occurrence_stats(const std::vector<VerificationPair>& pairs);

}  // namespace fvkit
