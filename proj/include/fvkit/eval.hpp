#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fvkit/corpus.hpp"
#include "fvkit/folds.hpp"
#include "fvkit/pairs.hpp"

namespace fvkit {

// Squared Euclidean distance per pair, aligned with `pairs`. Throws
// MissingEmbedding / NotNormalized.
std::vector<double> pair_distances(const std::vector<VerificationPair>& pairs, const Corpus& corpus);

enum class ThresholdSearch {
  // Every distinct decision: midpoints of consecutive distinct distances plus
  // one sentinel below the minimum and one above the maximum.
  ExactMidpoint,
  // theta = 0.00, 0.01, ..., 4.00 as in common evaluation harnesses.
  FixedGrid,
};

struct ThresholdResult {
  double theta = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Predicts genuine iff distance < theta. Returns the smallest theta with the
// highest accuracy. Throws DegenerateLabels unless both labels occur.
ThresholdResult best_threshold(std::span<const double> distances, std::span<const PairLabel> labels,
                               ThresholdSearch search = ThresholdSearch::ExactMidpoint);

double accuracy_at(double theta, std::span<const double> distances, std::span<const PairLabel> labels);

struct FoldResult {
  int fold = 0;
  double threshold = 0.0;
  double holdin_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  std::size_t holdout_pairs = 0;
};

struct EvalReport {
  std::vector<FoldResult> per_fold;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population standard deviation
  std::size_t n_pairs = 0;
};

struct EvalOptions {
  ThresholdSearch search = ThresholdSearch::ExactMidpoint;
  unsigned threads = 1;
};

// Leave-one-fold-out threshold fitting. Throws MissingFold when a pair is
// unassigned or a fold is empty.
EvalReport cross_validate(const std::vector<VerificationPair>& pairs, const FoldAssignment& assignment,
                          std::span<const double> distances, const EvalOptions& options = {});

struct BiasResult {
  double acc_disjoint = 0.0;
  double acc_overlapped = 0.0;
  double delta = 0.0;  // acc_disjoint - acc_overlapped
  EvalReport disjoint;
  EvalReport overlapped;
};

// Cross-validates the same pairs under identity-disjoint and identity-spread
// folds.
BiasResult bias_experiment(const std::vector<VerificationPair>& pairs, std::span<const double> distances,
                           int n_folds, std::uint64_t seed, bool balance_demographics = true,
                           const EvalOptions& options = {});
BiasResult bias_from_assignments(const std::vector<VerificationPair>& pairs, std::span<const double> distances,
                                 const FoldAssignment& disjoint, const FoldAssignment& overlapped,
                                 const EvalOptions& options = {});

std::string format_eval_table(const EvalReport& report);
std::string format_eval_kv(const EvalReport& report);
std::string format_bias_table(const BiasResult& result);
std::string format_bias_kv(const BiasResult& result);

}  // namespace fvkit
