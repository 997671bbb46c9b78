#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fvkit/pairs.hpp"

namespace fvkit {

// fold[i] is the fold of pairs[i]; -1 means unassigned.
struct FoldAssignment {
  int n_folds = 10;
  std::vector<int> fold;
};

// Identity-disjoint folds. Genuine pairs that share an identity form one atom;
// atoms are placed largest first into the fold with the most remaining room
// (per demographic when balancing), ties to the lowest fold, with an exact
// per-demographic search if that greedy order gets stuck. Impostors are
// dealt round-robin in difficulty order within each demographic, grouped by
// tag. Throws IndivisibleCounts or InfeasiblePacking rather than emit a
// violating assignment.
FoldAssignment build_folds(const std::vector<VerificationPair>& pairs, int n_folds = 10,
                           bool balance_demographics = true);

// Same sizes and balance as build_folds, but the genuine pairs of each
// identity are dealt to consecutive (hence distinct, up to n_folds pairs)
// folds, with identity order shuffled by the seed. Impostor placement is
// identical to build_folds.
FoldAssignment overlapped_folds(const std::vector<VerificationPair>& pairs, int n_folds, std::uint64_t seed,
                                bool balance_demographics = true);

enum class ViolationKind { Unassigned, FoldSize, IdentityOverlap, DemographicBalance };

std::string_view to_string(ViolationKind kind);

struct FoldViolation {
  ViolationKind kind;
  std::string detail;
};

struct FoldChecks {
  bool sizes = true;
  bool identity_disjoint = true;
  bool demographic_balance = true;
};

struct FoldReport {
  std::vector<FoldViolation> violations;
  bool pass() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

// Checks an assignment from scratch; needs identity_a / identity_b set.
FoldReport verify_folds(const std::vector<VerificationPair>& pairs, const FoldAssignment& assignment,
                        const FoldChecks& checks = {});

void apply_assignment(std::vector<VerificationPair>& pairs, const FoldAssignment& assignment);
// Reads the fold column back; throws MissingFold for unassigned pairs.
FoldAssignment assignment_from_pairs(const std::vector<VerificationPair>& pairs, int n_folds);

std::string format_fold_report(const std::vector<VerificationPair>& pairs, const FoldAssignment& assignment,
                               const FoldReport& report);

}  // namespace fvkit
