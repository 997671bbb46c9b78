#include "fvkit/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "fvkit/error.hpp"
#include "fvkit/parallel.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

bool harder(const VerificationPair& a, const VerificationPair& b) {
  const double da = a.difficulty();
  const double db = b.difficulty();
  if (da != db) return da > db;
  return a.pair_id() < b.pair_id();
}

void SelectionPolicy::validate() const {
  auto unit = [](double v) { return v >= -1.0 && v <= 1.0; };
  if (!unit(tau_impostor_max) || !unit(tau_genuine_min)) {
    throw Error(ErrorCode::InvalidPolicy, "similarity thresholds must lie in [-1, 1]");
  }
  if (age_gap_max && *age_gap_max < 0) throw Error(ErrorCode::InvalidPolicy, "age gap must be >= 0");
  if (occ_max_per_role < 1) throw Error(ErrorCode::InvalidPolicy, "occurrence cap must be >= 1");
  if (!(attr_conf_min > 0.5 && attr_conf_min <= 1.0)) {
    throw Error(ErrorCode::InvalidPolicy, "attribute confidence threshold must lie in (0.5, 1]");
  }
  for (const auto& [demographic, t] : targets) {
    if (t.genuine == 0 || t.impostor == 0) {
      throw Error(ErrorCode::InvalidPolicy, "targets must be positive for " + std::string(to_string(demographic)));
    }
  }
}

std::map<Demographic, Targets> hadrian_default_targets() {
  return {{Demographic::AAM, {1500, 1500}}, {Demographic::CM, {1500, 1500}}};
}

std::map<Demographic, Targets> eclipse_default_targets() {
  return {{Demographic::AAM, {750, 750}},
          {Demographic::AAF, {750, 750}},
          {Demographic::CM, {750, 750}},
          {Demographic::CF, {750, 750}}};
}

std::vector<std::string> attribute_pool(const Corpus& corpus, const AttributePredicate& predicate, double conf_min) {
  const auto& names = corpus.attribute_names();
  for (const auto& [name, truth] : predicate) {
    if (!std::binary_search(names.begin(), names.end(), name)) throw Error(ErrorCode::UnknownAttribute, name);
  }
  std::vector<std::string> out;
  for (const auto& rec : corpus.records()) {
    bool ok = true;
    for (const auto& [name, truth] : predicate) {
      auto it = rec.attributes.find(name);
      if (it == rec.attributes.end()) {
        ok = false;
        break;
      }
      ok = truth ? it->second >= conf_min : 1.0 - it->second >= conf_min;
      if (!ok) break;
    }
    if (ok) out.push_back(rec.image_id);
  }
  return out;
}

std::map<Demographic, ExposurePools> exposure_pools(const Corpus& corpus, const ExposurePoolSpec& spec,
                                                    const std::vector<std::string>& candidates) {
  for (const auto& [demographic, fraction] : spec.tail_fraction) {
    if (!(fraction > 0.0 && fraction < 0.5)) {
      throw Error(ErrorCode::InvalidPolicy, "tail fraction must lie in (0, 0.5)");
    }
  }
  std::map<Demographic, std::vector<std::pair<double, std::string>>> by_demographic;
  for (const auto& id : candidates) {
    const ImageRecord& rec = corpus.record(id);
    if (!spec.tail_fraction.contains(rec.demographic)) continue;
    if (!rec.exposure) throw Error(ErrorCode::MissingExposure, id);
    by_demographic[rec.demographic].emplace_back(*rec.exposure, id);
  }
  std::map<Demographic, ExposurePools> out;
  for (const auto& [demographic, fraction] : spec.tail_fraction) {
    auto& items = by_demographic[demographic];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(items.size()) + 1e-9));
    ExposurePools pools;
    for (std::size_t i = 0; i < m; ++i) pools.low.push_back(items[i].second);
    for (std::size_t i = items.size() - m; i < items.size(); ++i) pools.high.push_back(items[i].second);
    out.emplace(demographic, std::move(pools));
  }
  return out;
}

std::map<Demographic, ExposurePools> exposure_pools(const Corpus& corpus, const ExposurePoolSpec& spec) {
  std::vector<std::string> all;
  all.reserve(corpus.size());
  for (const auto& rec : corpus.records()) all.push_back(rec.image_id);
  return exposure_pools(corpus, spec, all);
}

namespace {

std::vector<std::size_t> restrict_pool(const Corpus& corpus, const std::vector<std::string>& pool,
                                       Demographic demographic, std::string_view what) {
  std::vector<std::size_t> rows;
  for (const auto& id : pool) {
    const std::size_t r = corpus.index_of(id);
    if (corpus.records()[r].demographic == demographic) rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return corpus.records()[a].image_id < corpus.records()[b].image_id;
  });
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (rows.empty()) {
    throw Error(ErrorCode::EmptyPool, std::string(what) + " pool empty for " + std::string(to_string(demographic)));
  }
  return rows;
}

std::string unordered_key(const std::string& a, const std::string& b) {
  return a < b ? a + '|' + b : b + '|' + a;
}

}  // namespace

std::vector<VerificationPair> enumerate_candidates(const Corpus& corpus, const GenuineRule& genuine,
                                                   const std::vector<ImpostorRule>& impostors,
                                                   Demographic demographic) {
  const auto& records = corpus.records();
  auto make = [&](std::size_t a, std::size_t b, PairLabel label, const std::string& tag) {
    VerificationPair p;
    p.image_a = records[a].image_id;
    p.image_b = records[b].image_id;
    p.label = label;
    p.demographic = demographic;
    p.score = static_cast<float>(cosine(corpus.embeddings().row(a), corpus.embeddings().row(b)));
    p.tag = tag;
    p.identity_a = records[a].identity_id;
    p.identity_b = records[b].identity_id;
    return p;
  };

  std::vector<VerificationPair> out;
  const auto rows_a = restrict_pool(corpus, genuine.pool_a, demographic, genuine.tag + " (a)");
  const auto rows_b = restrict_pool(corpus, genuine.pool_b, demographic, genuine.tag + " (b)");
  std::map<std::string, std::vector<std::size_t>> b_by_identity;
  for (std::size_t r : rows_b) b_by_identity[records[r].identity_id].push_back(r);
  std::unordered_set<std::string> seen;
  for (std::size_t a : rows_a) {
    auto it = b_by_identity.find(records[a].identity_id);
    if (it == b_by_identity.end()) continue;
    for (std::size_t b : it->second) {
      if (a == b) continue;
      if (!seen.insert(unordered_key(records[a].image_id, records[b].image_id)).second) continue;
      out.push_back(make(a, b, PairLabel::Genuine, genuine.tag));
    }
  }

  seen.clear();
  for (const auto& rule : impostors) {
    const auto rows = restrict_pool(corpus, rule.pool, demographic, rule.tag);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        const auto& ra = records[rows[i]];
        const auto& rb = records[rows[j]];
        if (ra.identity_id == rb.identity_id) continue;
        if (!seen.insert(unordered_key(ra.image_id, rb.image_id)).second) continue;
        out.push_back(make(rows[i], rows[j], PairLabel::Impostor, rule.tag));
      }
    }
  }
  return out;
}

std::vector<VerificationPair> filter_candidates(const std::vector<VerificationPair>& pairs,
                                                const SelectionPolicy& policy, const Corpus& corpus) {
  const float genuine_min = static_cast<float>(policy.tau_genuine_min);
  const float impostor_max = static_cast<float>(policy.tau_impostor_max);
  std::vector<VerificationPair> kept;
  for (const auto& p : pairs) {
    if (p.genuine()) {
      if (p.score < genuine_min) continue;
      if (policy.age_gap_max) {
        const auto& a = corpus.record(p.image_a);
        const auto& b = corpus.record(p.image_b);
        if (!a.age || !b.age) {
          throw Error(ErrorCode::MissingAge, "genuine pair " + p.pair_id() + " lacks an age");
        }
        if (std::abs(*a.age - *b.age) > *policy.age_gap_max) continue;
      }
    } else if (p.score > impostor_max) {
      continue;
    }
    kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(), harder);

  std::unordered_map<std::string, std::size_t> genuine_uses;
  std::unordered_map<std::string, std::size_t> impostor_uses;
  std::vector<VerificationPair> out;
  for (auto& p : kept) {
    auto& uses = p.genuine() ? genuine_uses : impostor_uses;
    std::size_t& ua = uses[p.image_a];
    std::size_t& ub = uses[p.image_b];
    if (ua >= policy.occ_max_per_role || ub >= policy.occ_max_per_role) continue;
    ++ua;
    ++ub;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// Splits `target` over tag pools of the given sizes: even shares first, then
// whatever small pools could not absorb goes to the others.
std::vector<std::size_t> spread_quota(std::size_t target, const std::vector<std::size_t>& available) {
  std::vector<std::size_t> take(available.size(), 0);
  std::size_t need = target;
  while (need > 0) {
    std::vector<std::size_t> open;
    for (std::size_t t = 0; t < available.size(); ++t) {
      if (take[t] < available[t]) open.push_back(t);
    }
    if (open.empty()) break;
    const std::size_t share = need / open.size();
    std::size_t extra = need % open.size();
    for (std::size_t t : open) {
      std::size_t want = share + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
      const std::size_t got = std::min(want, available[t] - take[t]);
      take[t] += got;
      need -= got;
    }
  }
  return take;
}

}  // namespace

FinalSelection select_final(const std::vector<VerificationPair>& pairs, const std::map<Demographic, Targets>& targets) {
  FinalSelection out;
  for (const auto& [demographic, target] : targets) {
    for (PairLabel label : {PairLabel::Genuine, PairLabel::Impostor}) {
      const std::size_t want = label == PairLabel::Genuine ? target.genuine : target.impostor;
      std::map<std::string, std::vector<const VerificationPair*>> by_tag;
      std::size_t total = 0;
      for (const auto& p : pairs) {
        if (p.demographic != demographic || p.label != label) continue;
        by_tag[p.tag].push_back(&p);
        ++total;
      }
      if (total < want) {
        throw Error(ErrorCode::InsufficientCandidates,
                    std::string(to_string(demographic)) + " " + (label == PairLabel::Genuine ? "genuine" : "impostor") +
                        ": need " + std::to_string(want) + ", have " + std::to_string(total) + " (short " +
                        std::to_string(want - total) + ")");
      }
      std::vector<std::size_t> available;
      for (auto& [tag, items] : by_tag) {
        std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return harder(*a, *b); });
        available.push_back(items.size());
      }
      const auto take = spread_quota(want, available);
      std::size_t t = 0;
      for (auto& [tag, items] : by_tag) {
        for (std::size_t i = 0; i < take[t]; ++i) out.pairs.push_back(*items[i]);
        out.split.push_back({demographic, label, tag, available[t], take[t]});
        ++t;
      }
    }
  }
  return out;
}

std::vector<VerificationPair> remove_rejected(std::vector<VerificationPair> pairs,
                                              const std::set<std::string>& rejected_pair_ids) {
  if (rejected_pair_ids.empty()) return pairs;
  std::erase_if(pairs, [&](const VerificationPair& p) {
    return rejected_pair_ids.contains(p.pair_id()) || rejected_pair_ids.contains(p.image_b + "|" + p.image_a);
  });
  return pairs;
}

namespace {

struct DemographicJob {
  Demographic demographic;
  GenuineRule genuine;
  std::vector<ImpostorRule> impostors;
};

PairBuild run_jobs(const Corpus& corpus, const SelectionPolicy& policy, const std::vector<DemographicJob>& jobs,
                   const std::set<std::string>& rejected, unsigned threads) {
  std::vector<std::vector<VerificationPair>> per_job(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      per_job[i] = enumerate_candidates(corpus, jobs[i].genuine, jobs[i].impostors, jobs[i].demographic);
    }
  });
  std::vector<VerificationPair> all;
  for (auto& v : per_job) all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  PairBuild build;
  build.enumerated = all.size();
  const auto filtered = filter_candidates(remove_rejected(std::move(all), rejected), policy, corpus);
  build.filtered = filtered.size();
  build.selection = select_final(filtered, policy.targets);
  return build;
}

}  // namespace

PairBuild build_hadrian(const Corpus& corpus, const SelectionPolicy& policy, const HadrianConfig& config,
                        const std::set<std::string>& rejected, unsigned threads) {
  policy.validate();
  const auto no_hair = attribute_pool(corpus, config.no_facial_hair, policy.attr_conf_min);
  const auto full_hair = attribute_pool(corpus, config.full_facial_hair, policy.attr_conf_min);
  std::vector<DemographicJob> jobs;
  for (const auto& [demographic, target] : policy.targets) {
    jobs.push_back({demographic, {"nohair-fullhair", no_hair, full_hair}, {{"fullhair-fullhair", full_hair}}});
  }
  return run_jobs(corpus, policy, jobs, rejected, threads);
}

PairBuild build_eclipse(const Corpus& corpus, const SelectionPolicy& policy, const EclipseConfig& config,
                        const std::set<std::string>& rejected, unsigned threads) {
  policy.validate();
  std::vector<std::string> eligible;
  if (config.restrict_to.empty()) {
    for (const auto& rec : corpus.records()) eligible.push_back(rec.image_id);
  } else {
    eligible = attribute_pool(corpus, config.restrict_to, policy.attr_conf_min);
  }
  const auto pools = exposure_pools(corpus, config.pools, eligible);
  std::vector<DemographicJob> jobs;
  for (const auto& [demographic, target] : policy.targets) {
    auto it = pools.find(demographic);
    if (it == pools.end()) {
      throw Error(ErrorCode::EmptyPool, "no exposure tail fraction for " + std::string(to_string(demographic)));
    }
    jobs.push_back({demographic,
                    {"high-low", it->second.high, it->second.low},
                    {{"high-high", it->second.high}, {"low-low", it->second.low}}});
  }
  return run_jobs(corpus, policy, jobs, rejected, threads);
}

std::string serialize_pairs(const std::vector<VerificationPair>& pairs) {
  std::string out = "image_a\timage_b\tlabel\tdemographic\tscore\ttag\tfold\n";
  for (const auto& p : pairs) {
    out += p.image_a + '\t' + p.image_b + '\t' + (p.genuine() ? "1" : "0") + '\t' +
           std::string(to_string(p.demographic)) + '\t' + tsv::format_fixed(p.score, 6) + '\t' + p.tag + '\t' +
           (p.fold ? std::to_string(*p.fold) : "") + '\n';
  }
  return out;
}

std::vector<VerificationPair> parse_pairs(std::string_view text, std::string_view source) {
  const auto table = tsv::parse_table(text, source);
  const auto a_col = table.require_column("image_a");
  const auto b_col = table.require_column("image_b");
  const auto label_col = table.require_column("label");
  const auto demographic_col = table.require_column("demographic");
  const auto score_col = table.require_column("score");
  const auto tag_col = table.column_index("tag");
  const auto fold_col = table.column_index("fold");
  std::vector<VerificationPair> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    VerificationPair p;
    p.image_a = row[a_col];
    p.image_b = row[b_col];
    if (row[label_col] == "1") {
      p.label = PairLabel::Genuine;
    } else if (row[label_col] == "0") {
      p.label = PairLabel::Impostor;
    } else {
      throw Error(ErrorCode::UnparsableField, std::string(source) + " line " +
                                                  std::to_string(table.line_numbers[r]) + ": label must be 0 or 1");
    }
    p.demographic = parse_demographic(row[demographic_col]);
    p.score = static_cast<float>(tsv::parse_double(row[score_col], "score"));
    if (tag_col) p.tag = row[*tag_col];
    if (fold_col && !row[*fold_col].empty()) {
      const auto fold = tsv::parse_int(row[*fold_col], "fold");
      if (fold < 0) throw Error(ErrorCode::UnparsableField, "negative fold");
      p.fold = static_cast<int>(fold);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void attach_identities(std::vector<VerificationPair>& pairs, const Corpus& corpus) {
  for (auto& p : pairs) {
    p.identity_a = corpus.record(p.image_a).identity_id;
    p.identity_b = corpus.record(p.image_b).identity_id;
  }
}

PairSetStats occurrence_stats(const std::vector<VerificationPair>& pairs) {
  std::unordered_map<std::string, std::size_t> genuine;
  std::unordered_map<std::string, std::size_t> impostor;
  std::unordered_map<std::string, std::size_t> total;
  for (const auto& p : pairs) {
    auto& role = p.genuine() ? genuine : impostor;
    for (const auto* id : {&p.image_a, &p.image_b}) {
      ++role[*id];
      ++total[*id];
    }
  }
  PairSetStats s;
  for (const auto& [id, n] : genuine) s.max_genuine_occurrence = std::max(s.max_genuine_occurrence, n);
  for (const auto& [id, n] : impostor) s.max_impostor_occurrence = std::max(s.max_impostor_occurrence, n);
  for (const auto& [id, n] : total) s.max_occurrence = std::max(s.max_occurrence, n);
  return s;
}

}  // namespace fvkit
