// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "fvkit/corpus.hpp"
#include "fvkit/eval.hpp"
#include "fvkit/folds.hpp"
#include "fvkit/idclean.hpp"
#include "fvkit/overlap.hpp"
#include "fvkit/pairs.hpp"
#include "fvkit/random.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/synthetic.hpp"
#include "generators.hpp"
#include "helpers.hpp"
#include "invariants.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

using namespace fvkit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure; later checks keep running for the detail line.
struct Tally {
  bool pass = true;
  std::string first_failure;
  void check(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      first_failure = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome topk_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  Tally t;
  std::size_t instances = 0, ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t dim = trial % 2 == 0 ? 8 : 512;
    // The first two instances are at the size limits.
    const std::size_t n_test = trial < 2 ? 200 : 1 + rng.below(200);
    const std::size_t n_train = trial < 2 ? 2000 : 1 + rng.below(2000);
    const auto test = testutil::random_set(rng, n_test, dim, "q");
    auto train = testutil::random_set(rng, n_train, dim, "r");
    // Plant exact ties: copy some train rows over others.
    for (std::size_t c = 0; c < n_train / 10; ++c) {
      const std::size_t from = rng.below(n_train), to = rng.below(n_train);
      const std::vector<float> copy(train.row(from).begin(), train.row(from).end());
      std::copy(copy.begin(), copy.end(), train.row(to).begin());
    }
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n_train, 10));
    const auto want = oracle::top_k(test, train, k);
    const auto one = top_k_cross(test, train, {k, 1});
    const auto eight = top_k_cross(test, train, {k, 8});
    ++instances;
    for (std::size_t i = 0; i < n_test && t.pass; ++i) {
      for (std::size_t r = 0; r < k; ++r) {
        const auto& h = one[i].hits[r];
        t.check(h.train_image_id == want[i][r].train_id && h.score == want[i][r].score,
                "instance " + std::to_string(trial) + " row " + std::to_string(i) + " rank " + std::to_string(r + 1));
        t.check(eight[i].hits[r].train_image_id == h.train_image_id && eight[i].hits[r].score == h.score,
                "8 threads differ on instance " + std::to_string(trial));
        if (r > 0 && want[i][r].score == want[i][r - 1].score) ++ties;
      }
    }
  }
  const double secs = seconds_since(t0);
  t.check(secs < 30.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream d;
  d << instances << " instances, " << ties << " tied ranks, " << secs << " s (limit 30 s)";
  return {t.pass, t.pass ? d.str() : t.first_failure + "; " + d.str()};
}

Outcome metric_identity() {
  Rng rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const std::uint32_t dim = 8 + static_cast<std::uint32_t>(rng.below(505));
    const auto a = testutil::random_unit(rng, dim), b = testutil::random_unit(rng, dim);
    worst = std::max(worst, std::abs(squared_euclidean(a, b) - (2.0 - 2.0 * cosine(a, b))));
  }
  std::ostringstream d;
  d << "1e5 pairs, max |d2 - (2 - 2cos)| = " << worst << " (limit 1e-5)";
  return {worst < 1e-5, d.str()};
}

Outcome overlap_arithmetic() {
  const std::vector<std::tuple<std::size_t, std::size_t, std::string>> cases{
      {384, 7701, "4.99%"}, {2009, 4281, "46.93%"}, {1459, 4366, "33.42%"}, {1000, 5298, "18.88%"}};
  Tally t;
  std::string got;
  for (const auto& [num, den, want] : cases) {
    const auto s = format_percent(num, den);
    got += (got.empty() ? "" : ", ") + s;
    t.check(s == want, std::to_string(num) + "/" + std::to_string(den) + " gave " + s + ", want " + want);
  }
  return {t.pass, t.pass ? got : t.first_failure};
}

Outcome dbscan_oracle() {
  Rng rng(1003);
  Tally t;
  int instances = 0;
  for (int trial = 0; trial < 250; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const bool sphere = rng.below(2) == 1;
    const std::size_t clumps = 1 + rng.below(4);
    std::vector<std::array<double, 3>> centers;
    for (std::size_t c = 0; c < clumps; ++c) centers.push_back({rng.normal(), rng.normal(), sphere ? rng.normal() : 0.0});
    const double spread = 0.05 + 0.5 * rng.uniform();
    std::vector<std::vector<float>> pts;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = centers[rng.below(clumps)];
      std::array<double, 3> v{c[0] + spread * rng.normal(), c[1] + spread * rng.normal(),
                              sphere ? c[2] + spread * rng.normal() : 0.0};
      const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      std::vector<float> p;
      for (std::size_t k = 0; k < (sphere ? 3u : 2u); ++k) p.push_back(static_cast<float>(v[k] / norm));
      pts.push_back(p);
    }
    const double eps = 0.002 + 0.2 * rng.uniform();
    const std::size_t min_pts = 1 + rng.below(5);
    const auto got = dbscan(std::vector<std::span<const float>>(pts.begin(), pts.end()), {eps, min_pts});
    t.check(oracle::canonical(got) == oracle::canonical(oracle::dbscan(pts, eps, min_pts)),
            "partition differs on instance " + std::to_string(trial));
    ++instances;
  }
  int blobs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t big = 3 + rng.below(15);
    const std::size_t small = 2 + rng.below(big - 2);
    const double c1 = 6.283185307179586 * rng.uniform();
    std::vector<testutil::Image> images;
    std::set<std::string> want;
    std::vector<int> membership(big, 0);
    membership.insert(membership.end(), small, 1);
    rng.shuffle(membership);
    for (std::size_t i = 0; i < membership.size(); ++i) {
      const double a = c1 + (membership[i] ? 3.141592653589793 : 0.0) + 0.01 * (rng.uniform() - 0.5);
      const std::string id = "p_" + std::to_string(i);
      images.push_back({id, "p", {static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))}});
      if (membership[i] == 0) want.insert(id);
    }
    const auto r = majority_filter(testutil::make_corpus(images), "p", {0.01, 2});
    t.check(std::set<std::string>(r.retained.begin(), r.retained.end()) == want,
            "two-blob instance " + std::to_string(trial) + " kept the wrong cluster");
    ++blobs;
  }
  std::ostringstream d;
  d << instances << " random partitions match the reference, " << blobs << " two-blob majorities";
  return {t.pass, t.pass ? d.str() : t.first_failure};
}

std::set<std::string> identities_of(const Manifest& m) {
  std::set<std::string> out;
  for (const auto& r : m.records) out.insert(r.identity_id);
  return out;
}

Outcome variant_invariants() {
  Rng rng(1004);
  Tally t;
  int instances = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Manifest train;
    const std::size_t n_ids = 2 + rng.below(60);
    for (std::size_t i = 0; i < n_ids; ++i) {
      const std::size_t k = 1 + rng.below(6);
      for (std::size_t j = 0; j < k; ++j) {
        train.records.push_back({"m" + std::to_string(i) + "_" + std::to_string(j), "m" + std::to_string(i)});
      }
    }
    rng.shuffle(train.records);
    std::vector<IdentityMatch> matches;
    std::set<std::string> overlapped;
    for (std::size_t i = 0, n = rng.below(n_ids / 2 + 1); i < n; ++i) {
      const std::string m = "m" + std::to_string(rng.below(n_ids));
      matches.push_back({"t" + std::to_string(rng.below(10)), m});
      overlapped.insert(m);
    }
    const std::uint64_t seed = rng.next();
    const auto d = build_variant(train, matches, {}, {VariantKind::IdDisjoint, seed});
    const auto r = build_variant(train, matches, {}, {VariantKind::IdOverlapR, seed});
    const auto ids_d = identities_of(d.manifest), ids_r = identities_of(r.manifest);
    const std::string at = " (instance " + std::to_string(trial) + ")";
    t.check(ids_d.size() == ids_r.size(), "identity counts differ" + at);
    for (const auto& o : overlapped) t.check(!ids_d.contains(o), "ID-Disjoint keeps overlapped " + o + at);
    const auto again = build_variant(train, matches, {}, {VariantKind::IdOverlapR, seed});
    t.check(serialize_manifest(again.manifest) == serialize_manifest(r.manifest), "ID-Overlap-R not reproducible" + at);
    ++instances;
  }
  // Same checks on the synthetic fixture's confirmed matches.
  const auto fx = synthetic::make_fixture({});
  std::vector<IdentityMatch> matches;
  std::set<std::string> overlapped;
  const auto confirmed = apply_annotations(
      classify_hits(flatten(top_k_cross(normalize(fx.test), normalize(fx.train), {2, 1})), ThresholdPolicy{}),
      fx.annotations);
  for (const auto& m : confirmed_matches(confirmed, fx.test_manifest, fx.train_manifest)) {
    matches.push_back(m);
    overlapped.insert(m.train_identity);
  }
  const auto d = build_variant(fx.train_manifest, matches, {}, {VariantKind::IdDisjoint, 5});
  const auto r = build_variant(fx.train_manifest, matches, {}, {VariantKind::IdOverlapR, 5});
  t.check(!overlapped.empty(), "fixture has no confirmed overlap");
  t.check(identities_of(d.manifest).size() == identities_of(r.manifest).size(), "fixture identity counts differ");
  for (const auto& o : overlapped) t.check(!identities_of(d.manifest).contains(o), "fixture ID-Disjoint keeps " + o);
  t.check(serialize_manifest(build_variant(fx.train_manifest, matches, {}, {VariantKind::IdOverlapR, 5}).manifest) ==
              serialize_manifest(r.manifest),
          "fixture ID-Overlap-R not reproducible");
  std::ostringstream out;
  out << instances << " random corpora + fixture (" << overlapped.size() << " overlapped identities)";
  return {t.pass, t.pass ? out.str() : t.first_failure};
}

Outcome pair_selection_invariants() {
  Tally t;
  std::size_t sets = 0, pairs = 0;
  for (std::uint64_t seed : {7u, 11u, 23u}) {
    synthetic::Options o;
    o.seed = seed;
    const auto fx = synthetic::make_fixture(o);
    const Corpus corpus = build_corpus(normalize(fx.subjects), fx.subjects_manifest);
    SelectionPolicy hadrian;
    hadrian.targets = {{Demographic::AAM, {200, 200}}, {Demographic::CM, {200, 200}}};
    SelectionPolicy eclipse;
    for (auto d : {Demographic::AAM, Demographic::AAF, Demographic::CM, Demographic::CF}) eclipse.targets[d] = {100, 100};
    for (const bool is_eclipse : {false, true}) {
      const auto& policy = is_eclipse ? eclipse : hadrian;
      try {
        const auto build = is_eclipse ? build_eclipse(corpus, policy, {}) : build_hadrian(corpus, policy, {});
        const auto v = invariants::pair_set_violation(build.selection.pairs, corpus, policy);
        t.check(v.empty(), std::string(is_eclipse ? "Eclipse" : "Hadrian") + " seed " + std::to_string(seed) + ": " + v);
        const auto stats = occurrence_stats(build.selection.pairs);
        t.check(stats.max_genuine_occurrence <= 3 && stats.max_impostor_occurrence <= 3 && stats.max_occurrence <= 6,
                "occurrence_stats over the caps");
        ++sets;
        pairs += build.selection.pairs.size();
      } catch (const std::exception& e) {
        t.check(false, std::string(is_eclipse ? "Eclipse" : "Hadrian") + " seed " + std::to_string(seed) + ": " + e.what());
      }
    }
  }
  std::ostringstream d;
  d << sets << " Hadrian/Eclipse sets, " << pairs << " pairs; score, age, occurrence and target rules hold";
  return {t.pass, t.pass ? d.str() : t.first_failure};
}

Outcome fold_invariants() {
  Rng rng(1005);
  Tally t;
  int feasible = 0, seeded = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_folds = trial % 3 == 0 ? 10 : 2 + static_cast<int>(rng.below(9));
    auto pairs = gen::feasible_fold_instance(rng, n_folds);
    // Every instance gets one two-pair identity and one single-pair identity
    // per fold in two demographics, so each kind of violation can be seeded.
    for (auto d : {Demographic::AAM, Demographic::CF}) {
      for (int f = 0; f < n_folds; ++f) {
        const std::string id = "solo" + std::to_string(static_cast<int>(d)) + "_" + std::to_string(f);
        pairs.push_back(gen::pair(id + "a", id + "b", id, id, PairLabel::Genuine, d, 0.5f, "g"));
        pairs.push_back(gen::pair(id + "c", id + "d", id, "zz", PairLabel::Impostor, d, 0.5f, "i"));
      }
    }
    for (int f = 0; f < n_folds; ++f) {
      for (const char* s : {"1", "2"}) {
        const std::string id = "duo" + std::to_string(f);
        pairs.push_back(gen::pair(id + s + "a", id + s + "b", id, id, PairLabel::Genuine, Demographic::CM, 0.5f, "g"));
      }
    }
    const std::string at = " (instance " + std::to_string(trial) + ")";
    FoldAssignment good;
    try {
      good = build_folds(pairs, n_folds);
    } catch (const std::exception& e) {
      t.check(false, std::string("build_folds failed: ") + e.what() + at);
      continue;
    }
    const auto recount = oracle::recount_folds(pairs, good.fold, n_folds);
    t.check(verify_folds(pairs, good).pass() && recount.sizes_ok && recount.disjoint_ok && recount.balance_ok,
            "valid assignment rejected" + at);
    ++feasible;

    auto find = [&](auto pred) {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pred(i)) return i;
      }
      return pairs.size();
    };
    const std::string aam = "solo" + std::to_string(static_cast<int>(Demographic::AAM));
    const std::string cf = "solo" + std::to_string(static_cast<int>(Demographic::CF));
    // Size: move one genuine pair.
    {
      auto bad = good;
      const auto i = find([&](std::size_t k) { return pairs[k].image_a == aam + "_0a"; });
      bad.fold[i] = (bad.fold[i] + 1) % n_folds;
      t.check(verify_folds(pairs, bad).has(ViolationKind::FoldSize), "size violation missed" + at);
    }
    // Identity: swap a two-pair identity's pair with a same-demographic pair elsewhere.
    {
      auto bad = good;
      const auto i = find([&](std::size_t k) { return pairs[k].image_a == "duo01a"; });
      const auto j = find([&](std::size_t k) {
        return pairs[k].genuine() && pairs[k].demographic == Demographic::CM && good.fold[k] != good.fold[i] &&
               pairs[k].identity_a != "duo0";
      });
      std::swap(bad.fold[i], bad.fold[j]);
      const auto r = verify_folds(pairs, bad);
      t.check(r.has(ViolationKind::IdentityOverlap) && !r.has(ViolationKind::FoldSize),
              "identity violation missed" + at);
    }
    // Balance: swap single-pair identities of two demographics across folds.
    {
      auto bad = good;
      const auto i = find([&](std::size_t k) { return pairs[k].image_a == aam + "_0a"; });
      const auto j = find([&](std::size_t k) {
        return pairs[k].genuine() && pairs[k].identity_a.starts_with(cf) && good.fold[k] != good.fold[i];
      });
      std::swap(bad.fold[i], bad.fold[j]);
      const auto r = verify_folds(pairs, bad);
      t.check(r.has(ViolationKind::DemographicBalance) && !r.has(ViolationKind::FoldSize) &&
                  !r.has(ViolationKind::IdentityOverlap),
              "balance violation missed" + at);
    }
    seeded += 3;
  }
  std::ostringstream d;
  d << feasible << " feasible instances verified, " << seeded << " seeded violations detected";
  return {t.pass, t.pass ? d.str() : t.first_failure};
}

std::vector<std::vector<std::string>> fixture_rows(const std::string& name) {
  std::ifstream in(std::string(FVKIT_FIXTURES) + "/" + name);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (std::exchange(header, false)) continue;
    rows.push_back(tsv::split(line));
  }
  return rows;
}

Outcome cv_protocol() {
  Tally t;
  // Hand-worked fixture.
  const auto rows = fixture_rows("cv_toy.tsv");
  const auto want = fixture_rows("cv_toy_expected.tsv");
  std::vector<VerificationPair> pairs;
  std::vector<double> distances;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto id = std::to_string(i);
    auto p = gen::pair("a" + id, "b" + id, "x" + id, "y" + id,
                       rows[i][1] == "1" ? PairLabel::Genuine : PairLabel::Impostor, Demographic::CM, 0.f, "t");
    p.fold = std::stoi(rows[i][0]);
    pairs.push_back(p);
    distances.push_back(std::stod(rows[i][2]));
  }
  t.check(rows.size() == 8 && want.size() == 4, "fixture files missing or malformed");
  double toy_mean = -1;
  if (t.pass) {
    const auto r = cross_validate(pairs, assignment_from_pairs(pairs, 2), distances);
    for (std::size_t f = 0; f < 2; ++f) {
      t.check(r.per_fold[f].threshold == std::stod(want[f][1]) && r.per_fold[f].holdin_accuracy == std::stod(want[f][2]) &&
                  r.per_fold[f].holdout_accuracy == std::stod(want[f][3]),
              "hand-worked fold " + std::to_string(f) + " differs");
    }
    t.check(r.mean_accuracy == std::stod(want[2][1]) && r.std_accuracy == std::stod(want[3][1]),
            "hand-worked mean/std differ");
    toy_mean = r.mean_accuracy;
  }
  // Separable embeddings.
  Rng rng(1006);
  std::vector<testutil::Image> images;
  std::vector<VerificationPair> sep;
  FoldAssignment folds{10, {}};
  for (int i = 0; i < 300; ++i) {
    const auto s = std::to_string(i);
    const auto base = testutil::random_unit(rng, 64);
    auto near = base;
    for (auto& v : near) v += static_cast<float>(0.01 * rng.normal());
    images.push_back({"a" + s, "p" + s, base});
    images.push_back({"b" + s, "p" + s, near});
    images.push_back({"c" + s, "q" + s, testutil::random_unit(rng, 64)});
    sep.push_back(gen::pair("a" + s, "b" + s, "p" + s, "p" + s, PairLabel::Genuine, Demographic::CM, 0.f, "g"));
    sep.push_back(gen::pair("a" + s, "c" + s, "p" + s, "q" + s, PairLabel::Impostor, Demographic::CM, 0.f, "i"));
    folds.fold.push_back(i % 10);
    folds.fold.push_back(i % 10);
  }
  Corpus corpus = testutil::make_corpus(images);
  corpus = build_corpus(normalize(corpus.embeddings()), corpus.manifest());
  const auto separable = cross_validate(sep, folds, pair_distances(sep, corpus));
  t.check(separable.mean_accuracy == 1.0, "separable mean accuracy " + std::to_string(separable.mean_accuracy));
  // Shuffled labels, n = 3000.
  std::vector<VerificationPair> noise;
  std::vector<double> noise_d;
  FoldAssignment noise_folds{10, {}};
  std::vector<PairLabel> labels;
  for (int i = 0; i < 3000; ++i) labels.push_back(i % 2 ? PairLabel::Genuine : PairLabel::Impostor);
  rng.shuffle(labels);
  for (int i = 0; i < 3000; ++i) {
    const auto s = std::to_string(i);
    noise.push_back(gen::pair("a" + s, "b" + s, "x" + s, "y" + s, labels[i], Demographic::CM, 0.f, "t"));
    noise_d.push_back(4.0 * rng.uniform());
    noise_folds.fold.push_back(i % 10);
  }
  const auto shuffled = cross_validate(noise, noise_folds, noise_d);
  t.check(std::abs(shuffled.mean_accuracy - 0.5) <= 0.05,
          "shuffled-label mean accuracy " + std::to_string(shuffled.mean_accuracy));
  std::ostringstream d;
  d << "hand-worked fixture exact (mean " << toy_mean << "), separable " << separable.mean_accuracy
    << ", shuffled n=3000 " << shuffled.mean_accuracy << " (0.50 +- 0.05)";
  return {t.pass, t.pass ? d.str() : t.first_failure + "; " + d.str()};
}

// Two identity difficulty regimes: each identity's images sit at a
// per-identity radial offset from its centre, small for easy identities and
// large for hard ones, so genuine distances depend on the identity.
struct BiasInstance {
  std::vector<VerificationPair> pairs;
  std::vector<double> distances;
};

BiasInstance bias_instance(std::uint64_t seed) {
  constexpr std::uint32_t kDim = 64;
  constexpr int kIdentities = 20;        // 2 per fold
  constexpr int kImagesPerIdentity = 6;  // 15 possible genuine pairs
  constexpr int kPairsPerIdentity = 10;  // = folds, so spread folds mix every identity
  Rng rng(seed);
  std::vector<testutil::Image> images;
  for (int id = 0; id < kIdentities; ++id) {
    const auto center = testutil::random_unit(rng, kDim);
    const bool hard = id % 2 == 1;
    const double offset = (hard ? 2.5 : 0.45) * (0.8 + 0.4 * rng.uniform());
    for (int j = 0; j < kImagesPerIdentity; ++j) {
      auto v = center;
      const auto dir = testutil::random_unit(rng, kDim);
      for (std::uint32_t k = 0; k < kDim; ++k) v[k] += static_cast<float>(offset) * dir[k];
      images.push_back({"i" + std::to_string(id) + "_" + std::to_string(j), "id" + std::to_string(id), v});
    }
  }
  Corpus corpus = testutil::make_corpus(images);
  corpus = build_corpus(normalize(corpus.embeddings()), corpus.manifest());
  BiasInstance out;
  for (int id = 0; id < kIdentities; ++id) {
    std::vector<std::pair<int, int>> all;
    for (int a = 0; a < kImagesPerIdentity; ++a) {
      for (int b = a + 1; b < kImagesPerIdentity; ++b) all.push_back({a, b});
    }
    rng.shuffle(all);
    const std::string name = "id" + std::to_string(id);
    for (int k = 0; k < kPairsPerIdentity; ++k) {
      out.pairs.push_back(gen::pair("i" + std::to_string(id) + "_" + std::to_string(all[k].first),
                                    "i" + std::to_string(id) + "_" + std::to_string(all[k].second), name, name,
                                    PairLabel::Genuine, Demographic::CM, 0.f, "g"));
    }
  }
  std::set<std::string> used;
  while (out.pairs.size() < 2u * kIdentities * kPairsPerIdentity) {
    const int a = static_cast<int>(rng.below(kIdentities)), b = static_cast<int>(rng.below(kIdentities));
    if (a == b) continue;
    const std::string ia = "i" + std::to_string(a) + "_" + std::to_string(rng.below(kImagesPerIdentity));
    const std::string ib = "i" + std::to_string(b) + "_" + std::to_string(rng.below(kImagesPerIdentity));
    if (!used.insert(ia + "|" + ib).second) continue;
    out.pairs.push_back(gen::pair(ia, ib, "id" + std::to_string(a), "id" + std::to_string(b), PairLabel::Impostor,
                                  Demographic::CM, 0.f, "i"));
  }
  out.distances = pair_distances(out.pairs, corpus);
  return out;
}

Outcome bias_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kTrials = 50;
  double sum = 0.0;
  int non_positive = 0, zero = 0;
  double acc_d = 0.0, acc_o = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto inst = bias_instance(5000 + static_cast<std::uint64_t>(trial));
    const auto r = bias_experiment(inst.pairs, inst.distances, 10, static_cast<std::uint64_t>(trial));
    sum += r.delta;
    non_positive += r.delta <= 0.0;
    zero += r.delta == 0.0;
    acc_d += r.acc_disjoint;
    acc_o += r.acc_overlapped;
  }
  const double mean = sum / kTrials;
  const double frac = static_cast<double>(non_positive) / kTrials;
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << kTrials << " trials: mean delta " << mean << " (need <= 0), " << non_positive << "/" << kTrials
    << " delta <= 0 (need >= 70%; " << zero << " exactly 0), mean acc disjoint " << acc_d / kTrials << " overlapped "
    << acc_o / kTrials << ", " << secs << " s (limit 60 s)";
  return {mean <= 0.0 && frac >= 0.7 && secs < 60.0, d.str()};
}

Outcome end_to_end_determinism() {
  testutil::TempDir root;
  const auto a = pipeline::run(root / "run1", 7);
  const auto b = pipeline::run(root / "run2", 7);
  for (const auto* r : {&a, &b}) {
    if (!r->ok) {
      const auto& s = r->steps.back();
      return {false, "step " + s.args[0] + " exited " + std::to_string(s.status) + ": " + s.err};
    }
  }
  if (a.files.size() != b.files.size()) return {false, "different file sets"};
  std::size_t bytes = 0;
  for (const auto& [name, content] : a.files) {
    const auto it = b.files.find(name);
    if (it == b.files.end() || it->second != content) return {false, name + " differs between runs"};
    bytes += content.size();
  }
  std::ostringstream d;
  d << a.steps.size() << " steps, " << a.files.size() << " files (" << bytes << " bytes) byte-identical";
  return {true, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"top-k exactness", topk_exactness},
      {"metric identity", metric_identity},
      {"overlap arithmetic", overlap_arithmetic},
      {"DBSCAN oracle equivalence", dbscan_oracle},
      {"variant invariants", variant_invariants},
      {"pair-selection invariants", pair_selection_invariants},
      {"fold invariants", fold_invariants},
      {"CV protocol oracle", cv_protocol},
      {"bias direction", bias_direction},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
