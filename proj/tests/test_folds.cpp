#include <map>
#include <set>

#include "doctest.h"
#include "fvkit/error.hpp"
#include "fvkit/folds.hpp"
#include "generators.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fvkit;

namespace {

std::vector<VerificationPair> disjoint_example() {
  std::vector<VerificationPair> pairs;
  for (int i = 0; i < 20; ++i) {
    const auto s = std::to_string(i);
    pairs.push_back(gen::pair("g" + s + "a", "g" + s + "b", "id" + s, "id" + s, PairLabel::Genuine, Demographic::CM,
                              0.5f, "g"));
    pairs.push_back(gen::pair("i" + s + "a", "i" + s + "b", "x" + s, "y" + s, PairLabel::Impostor, Demographic::CM,
                              0.01f * i, "i"));
  }
  return pairs;
}

void check_valid(const std::vector<VerificationPair>& pairs, const FoldAssignment& a) {
  const auto report = verify_folds(pairs, a);
  INFO(format_fold_report(pairs, a, report));
  REQUIRE(report.pass());
  const auto recount = oracle::recount_folds(pairs, a.fold, a.n_folds);
  REQUIRE(recount.sizes_ok);
  REQUIRE(recount.disjoint_ok);
  REQUIRE(recount.balance_ok);
}

}  // namespace

TEST_CASE("20 disjoint genuine pairs and 20 impostors over 10 folds") {
  const auto pairs = disjoint_example();
  const auto a = build_folds(pairs, 10);
  std::vector<std::size_t> genuine(10, 0), impostor(10, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) ++(pairs[i].genuine() ? genuine : impostor)[a.fold[i]];
  CHECK(genuine == std::vector<std::size_t>(10, 2));
  CHECK(impostor == std::vector<std::size_t>(10, 2));
  check_valid(pairs, a);
}

TEST_CASE("build_folds errors") {
  SUBCASE("an identity with 4 pairs cannot fit a fold of 3") {
    std::vector<VerificationPair> pairs;
    for (int i = 0; i < 4; ++i) {
      pairs.push_back(gen::pair("a" + std::to_string(i), "b" + std::to_string(i), "big", "big", PairLabel::Genuine,
                                Demographic::CM, 0.5f, "g"));
    }
    pairs.push_back(gen::pair("c", "d", "small", "small", PairLabel::Genuine, Demographic::CM, 0.5f, "g"));
    pairs.push_back(gen::pair("e", "f", "tiny", "tiny", PairLabel::Genuine, Demographic::CM, 0.5f, "g"));
    pairs.push_back(gen::pair("x", "y", "big", "small", PairLabel::Impostor, Demographic::CM, 0.5f, "i"));
    pairs.push_back(gen::pair("z", "w", "big", "tiny", PairLabel::Impostor, Demographic::CM, 0.5f, "i"));
    CHECK_THROWS_CODE(build_folds(pairs, 2), ErrorCode::InfeasiblePacking);
  }
  SUBCASE("counts must divide") {
    auto pairs = disjoint_example();
    pairs.pop_back();
    CHECK_THROWS_CODE(build_folds(pairs, 10), ErrorCode::IndivisibleCounts);
    CHECK_THROWS_CODE(overlapped_folds(pairs, 10, 1), ErrorCode::IndivisibleCounts);
    CHECK_THROWS_CODE(build_folds(disjoint_example(), 0), ErrorCode::IndivisibleCounts);
  }
  SUBCASE("balanced counts must divide per demographic") {
    auto pairs = disjoint_example();
    pairs[0].demographic = Demographic::CF;
    pairs[1].demographic = Demographic::CF;
    CHECK_THROWS_CODE(build_folds(pairs, 10), ErrorCode::IndivisibleCounts);
    const auto a = build_folds(pairs, 10, false);
    CHECK(verify_folds(pairs, a, {true, true, false}).pass());
  }
  SUBCASE("identities must be attached") {
    auto pairs = disjoint_example();
    pairs[0].identity_a.clear();
    CHECK_THROWS_CODE(build_folds(pairs, 10), ErrorCode::UnknownIdentity);
  }
}

TEST_CASE("packing recovers when the greedy order gets stuck") {
  // Identity sizes 4,3,3,2,2 into 2 folds of 7: most-room-first strands the
  // last 2, but {4,3} + {3,2,2} fits.
  std::vector<VerificationPair> pairs;
  const std::vector<std::pair<std::string, int>> sizes{{"a", 4}, {"b", 3}, {"c", 3}, {"d", 2}, {"e", 2}};
  for (const auto& [id, k] : sizes) {
    for (int j = 0; j < k; ++j) {
      const auto img = id + std::to_string(j);
      pairs.push_back(gen::pair(img + "x", img + "y", id, id, PairLabel::Genuine, Demographic::CM, 0.5f, "g"));
    }
  }
  pairs.push_back(gen::pair("i1", "i2", "a", "b", PairLabel::Impostor, Demographic::CM, 0.5f, "i"));
  pairs.push_back(gen::pair("i3", "i4", "c", "d", PairLabel::Impostor, Demographic::CM, 0.5f, "i"));
  const auto a = build_folds(pairs, 2);
  check_valid(pairs, a);
  CHECK(a.fold[0] == 0);  // the 4-pair identity
  CHECK(a.fold[4] == 0);  // first 3-pair identity joins it
  CHECK(a.fold[7] == 1);
}

TEST_CASE("random feasible instances") {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_folds = 2 + static_cast<int>(rng.below(9));
    const auto pairs = gen::feasible_fold_instance(rng, n_folds);
    const auto a = build_folds(pairs, n_folds);
    REQUIRE(a.n_folds == n_folds);
    check_valid(pairs, a);
    // Deterministic.
    REQUIRE(build_folds(pairs, n_folds).fold == a.fold);
  }
}

TEST_CASE("verify_folds detects seeded violations") {
  Rng rng(52);
  for (int trial = 0; trial < 60; ++trial) {
    const int n_folds = 2 + static_cast<int>(rng.below(9));
    auto pairs = gen::feasible_fold_instance(rng, n_folds);
    // Guarantee one two-pair identity and two demographics with single-pair identities.
    for (auto d : {Demographic::AAM, Demographic::CF}) {
      for (int f = 0; f < n_folds; ++f) {
        const std::string id = "solo" + std::to_string(static_cast<int>(d)) + "_" + std::to_string(f);
        pairs.push_back(gen::pair(id + "a", id + "b", id, id, PairLabel::Genuine, d, 0.5f, "g"));
        pairs.push_back(gen::pair(id + "c", id + "d", id, "zz", PairLabel::Impostor, d, 0.5f, "i"));
      }
    }
    for (int f = 0; f < n_folds; ++f) {
      const std::string id = "duo" + std::to_string(f);
      for (const char* s : {"1", "2"}) {
        pairs.push_back(gen::pair(id + s + "a", id + s + "b", id, id, PairLabel::Genuine, Demographic::CM, 0.5f, "g"));
      }
    }
    const auto good = build_folds(pairs, n_folds);
    REQUIRE(verify_folds(pairs, good).pass());
    auto index_of = [&](const std::string& image) {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].image_a == image) return i;
      }
      FAIL("missing image");
      return std::size_t{0};
    };

    SUBCASE("size") {
      auto bad = good;
      const std::size_t i = index_of("solo0_0a");
      bad.fold[i] = (bad.fold[i] + 1) % n_folds;
      const auto r = verify_folds(pairs, bad);
      CHECK(r.has(ViolationKind::FoldSize));
      CHECK_FALSE(oracle::recount_folds(pairs, bad.fold, n_folds).sizes_ok);
    }
    SUBCASE("identity disjointness") {
      // Swap one pair of a two-pair identity with a same-demographic single pair elsewhere.
      auto bad = good;
      const std::size_t i = index_of("duo01a");
      std::size_t j = pairs.size();
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (pairs[k].genuine() && pairs[k].demographic == Demographic::CM && bad.fold[k] != bad.fold[i] &&
            pairs[k].identity_a != "duo0") {
          j = k;
          break;
        }
      }
      REQUIRE(j < pairs.size());
      std::swap(bad.fold[i], bad.fold[j]);
      const auto r = verify_folds(pairs, bad);
      CHECK(r.has(ViolationKind::IdentityOverlap));
      CHECK_FALSE(r.has(ViolationKind::FoldSize));
      CHECK_FALSE(r.has(ViolationKind::DemographicBalance));
      CHECK_FALSE(oracle::recount_folds(pairs, bad.fold, n_folds).disjoint_ok);
    }
    SUBCASE("demographic balance") {
      auto bad = good;
      const std::size_t i = index_of("solo" + std::to_string(static_cast<int>(Demographic::AAM)) + "_0a");
      std::size_t j = pairs.size();
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (pairs[k].genuine() && pairs[k].identity_a.starts_with("solo" + std::to_string(static_cast<int>(Demographic::CF))) &&
            bad.fold[k] != bad.fold[i]) {
          j = k;
          break;
        }
      }
      REQUIRE(j < pairs.size());
      std::swap(bad.fold[i], bad.fold[j]);
      const auto r = verify_folds(pairs, bad);
      CHECK(r.has(ViolationKind::DemographicBalance));
      CHECK_FALSE(r.has(ViolationKind::FoldSize));
      CHECK_FALSE(r.has(ViolationKind::IdentityOverlap));
      CHECK_FALSE(oracle::recount_folds(pairs, bad.fold, n_folds).balance_ok);
      CHECK(verify_folds(pairs, bad, {true, true, false}).pass());
    }
    SUBCASE("unassigned") {
      auto bad = good;
      bad.fold[0] = -1;
      CHECK(verify_folds(pairs, bad).has(ViolationKind::Unassigned));
    }
  }
}

TEST_CASE("verify_folds agrees with a recount on random assignments") {
  Rng rng(53);
  std::size_t passes = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n_folds = 2 + static_cast<int>(rng.below(3));
    auto pairs = gen::feasible_fold_instance(rng, n_folds, 2);
    if (pairs.size() > 24) pairs.resize(24);
    FoldAssignment a{n_folds, std::vector<int>(pairs.size())};
    // Start from a valid layout sometimes so both outcomes occur.
    if (trial % 2 == 0) {
      pairs = gen::feasible_fold_instance(rng, n_folds, 2);
      a = build_folds(pairs, n_folds);
      const std::size_t i = rng.below(pairs.size()), j = rng.below(pairs.size());
      if (rng.below(2)) std::swap(a.fold[i], a.fold[j]);
    } else {
      for (auto& f : a.fold) f = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_folds)));
    }
    const auto r = verify_folds(pairs, a);
    const auto want = oracle::recount_folds(pairs, a.fold, n_folds);
    REQUIRE(r.has(ViolationKind::FoldSize) == !want.sizes_ok);
    REQUIRE(r.has(ViolationKind::IdentityOverlap) == !want.disjoint_ok);
    REQUIRE(r.has(ViolationKind::DemographicBalance) == !want.balance_ok);
    passes += r.pass();
  }
  CHECK(passes > 0);
  CHECK(passes < 300);
}

TEST_CASE("overlapped_folds") {
  SUBCASE("two pairs of one identity land in different folds") {
    std::vector<VerificationPair> pairs;
    for (int i = 0; i < 2; ++i) {
      pairs.push_back(gen::pair("p" + std::to_string(i), "q" + std::to_string(i), "same", "same", PairLabel::Genuine,
                                Demographic::CM, 0.5f, "g"));
      pairs.push_back(gen::pair("r" + std::to_string(i), "s" + std::to_string(i), "u", "v", PairLabel::Impostor,
                                Demographic::CM, 0.5f, "i"));
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto a = overlapped_folds(pairs, 2, seed);
      CHECK(a.fold[0] != a.fold[2]);
      CHECK(verify_folds(pairs, a).has(ViolationKind::IdentityOverlap));
    }
  }
  Rng rng(54);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_folds = 2 + static_cast<int>(rng.below(9));
    const auto pairs = gen::feasible_fold_instance(rng, n_folds);
    const std::uint64_t seed = rng.below(1000);
    const auto a = overlapped_folds(pairs, n_folds, seed);
    REQUIRE(verify_folds(pairs, a, {true, false, true}).pass());
    REQUIRE(overlapped_folds(pairs, n_folds, seed).fold == a.fold);
    std::map<std::string, std::vector<int>> by_identity;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i].genuine()) by_identity[pairs[i].identity_a].push_back(a.fold[i]);
    }
    for (const auto& [_, folds] : by_identity) {
      REQUIRE(std::set<int>(folds.begin(), folds.end()).size() ==
              std::min(folds.size(), static_cast<std::size_t>(n_folds)));
    }
    // Impostor placement matches build_folds.
    const auto d = build_folds(pairs, n_folds);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!pairs[i].genuine()) REQUIRE(a.fold[i] == d.fold[i]);
    }
  }
}

TEST_CASE("fold column round trip") {
  auto pairs = disjoint_example();
  const auto a = build_folds(pairs, 10);
  CHECK_THROWS_CODE(assignment_from_pairs(pairs, 10), ErrorCode::MissingFold);
  apply_assignment(pairs, a);
  const auto back = parse_pairs(serialize_pairs(pairs));
  CHECK(assignment_from_pairs(back, 10).fold == a.fold);
  CHECK_THROWS_CODE(assignment_from_pairs(back, 5), ErrorCode::MissingFold);
}
