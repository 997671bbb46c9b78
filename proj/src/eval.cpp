#include "fvkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fvkit/error.hpp"
#include "fvkit/parallel.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

std::vector<double> pair_distances(const std::vector<VerificationPair>& pairs, const Corpus& corpus) {
  if (!corpus.embeddings().normalized) throw Error(ErrorCode::NotNormalized, "pair distances need unit vectors");
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(squared_euclidean(corpus.embedding(p.image_a), corpus.embedding(p.image_b)));
  return out;
}

double accuracy_at(double theta, std::span<const double> distances, std::span<const PairLabel> labels) {
  if (distances.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const bool predicted_genuine = distances[i] < theta;
    correct += predicted_genuine == (labels[i] == PairLabel::Genuine) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(distances.size());
}

ThresholdResult best_threshold(std::span<const double> distances, std::span<const PairLabel> labels,
                               ThresholdSearch search) {
  if (distances.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "distances and labels differ in length");
  std::size_t n_genuine = 0;
  for (auto l : labels) n_genuine += l == PairLabel::Genuine ? 1 : 0;
  if (n_genuine == 0 || n_genuine == labels.size()) {
    throw Error(ErrorCode::DegenerateLabels, "need at least one genuine and one impostor pair");
  }
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });

  ThresholdResult best;
  best.total = distances.size();
  // With theta below every distance everything is called impostor.
  std::size_t correct = labels.size() - n_genuine;
  auto consider = [&](double theta, std::size_t c, bool first) {
    if (first || c > best.correct) {
      best.theta = theta;
      best.correct = c;
    }
  };

  if (search == ThresholdSearch::ExactMidpoint) {
    consider(distances[order.front()] - 1.0, correct, true);
    std::size_t i = 0;
    while (i < order.size()) {
      const double v = distances[order[i]];
      while (i < order.size() && distances[order[i]] == v) {
        correct += labels[order[i]] == PairLabel::Genuine ? 1 : 0;
        correct -= labels[order[i]] == PairLabel::Genuine ? 0 : 1;
        ++i;
      }
      const double theta = i < order.size() ? 0.5 * (v + distances[order[i]]) : v + 1.0;
      consider(theta, correct, false);
    }
  } else {
    std::size_t i = 0;
    for (int step = 0; step <= 400; ++step) {
      const double theta = step * 0.01;
      while (i < order.size() && distances[order[i]] < theta) {
        correct += labels[order[i]] == PairLabel::Genuine ? 1 : 0;
        correct -= labels[order[i]] == PairLabel::Genuine ? 0 : 1;
        ++i;
      }
      consider(theta, correct, step == 0);
    }
  }
  best.accuracy = static_cast<double>(best.correct) / static_cast<double>(best.total);
  return best;
}

EvalReport cross_validate(const std::vector<VerificationPair>& pairs, const FoldAssignment& assignment,
                          std::span<const double> distances, const EvalOptions& options) {
  if (distances.size() != pairs.size() || assignment.fold.size() != pairs.size()) {
    throw Error(ErrorCode::DimMismatch, "pairs, distances and assignment differ in length");
  }
  const int n_folds = assignment.n_folds;
  std::vector<std::size_t> fold_sizes(static_cast<std::size_t>(std::max(n_folds, 0)), 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int f = assignment.fold[i];
    if (f < 0 || f >= n_folds) throw Error(ErrorCode::MissingFold, "pair " + pairs[i].pair_id() + " has no fold");
    ++fold_sizes[static_cast<std::size_t>(f)];
  }
  for (int f = 0; f < n_folds; ++f) {
    if (fold_sizes[static_cast<std::size_t>(f)] == 0) {
      throw Error(ErrorCode::MissingFold, "fold " + std::to_string(f) + " is empty");
    }
  }

  EvalReport report;
  report.n_pairs = pairs.size();
  report.per_fold.resize(static_cast<std::size_t>(n_folds));
  parallel_for(static_cast<std::size_t>(n_folds), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      std::vector<double> in_d, out_d;
      std::vector<PairLabel> in_l, out_l;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const bool held_out = static_cast<std::size_t>(assignment.fold[i]) == f;
        (held_out ? out_d : in_d).push_back(distances[i]);
        (held_out ? out_l : in_l).push_back(pairs[i].label);
      }
      const auto fit = best_threshold(in_d, in_l, options.search);
      FoldResult& r = report.per_fold[f];
      r.fold = static_cast<int>(f);
      r.threshold = fit.theta;
      r.holdin_accuracy = fit.accuracy;
      r.holdout_accuracy = accuracy_at(fit.theta, out_d, out_l);
      r.holdout_pairs = out_d.size();
    }
  });
  double sum = 0.0;
  for (const auto& r : report.per_fold) sum += r.holdout_accuracy;
  report.mean_accuracy = sum / n_folds;
  double var = 0.0;
  for (const auto& r : report.per_fold) var += (r.holdout_accuracy - report.mean_accuracy) * (r.holdout_accuracy - report.mean_accuracy);
  report.std_accuracy = std::sqrt(var / n_folds);
  return report;
}

BiasResult bias_from_assignments(const std::vector<VerificationPair>& pairs, std::span<const double> distances,
                                 const FoldAssignment& disjoint, const FoldAssignment& overlapped,
                                 const EvalOptions& options) {
  BiasResult r;
  r.disjoint = cross_validate(pairs, disjoint, distances, options);
  r.overlapped = cross_validate(pairs, overlapped, distances, options);
  r.acc_disjoint = r.disjoint.mean_accuracy;
  r.acc_overlapped = r.overlapped.mean_accuracy;
  r.delta = r.acc_disjoint - r.acc_overlapped;
  return r;
}

BiasResult bias_experiment(const std::vector<VerificationPair>& pairs, std::span<const double> distances,
                           int n_folds, std::uint64_t seed, bool balance, const EvalOptions& options) {
  return bias_from_assignments(pairs, distances, build_folds(pairs, n_folds, balance),
                               overlapped_folds(pairs, n_folds, seed, balance), options);
}

namespace {

std::string pct(double v) { return tsv::format_fixed(v * 100.0, 2); }

}  // namespace

std::string format_eval_table(const EvalReport& report) {
  std::string out = "fold\tthreshold\tholdin_acc\tholdout_acc\tpairs\n";
  for (const auto& r : report.per_fold) {
    out += std::to_string(r.fold) + '\t' + tsv::format_fixed(r.threshold, 4) + '\t' + pct(r.holdin_accuracy) + '\t' +
           pct(r.holdout_accuracy) + '\t' + std::to_string(r.holdout_pairs) + '\n';
  }
  out += "mean\t\t\t" + pct(report.mean_accuracy) + '\t' + std::to_string(report.n_pairs) + '\n';
  out += "std\t\t\t" + pct(report.std_accuracy) + "\t\n";
  return out;
}

std::string format_eval_kv(const EvalReport& report) {
  std::string out = "n_pairs=" + std::to_string(report.n_pairs) + '\n';
  out += "n_folds=" + std::to_string(report.per_fold.size()) + '\n';
  out += "mean_accuracy=" + tsv::format_shortest(report.mean_accuracy) + '\n';
  out += "std_accuracy=" + tsv::format_shortest(report.std_accuracy) + '\n';
  for (const auto& r : report.per_fold) {
    const std::string k = "fold." + std::to_string(r.fold) + '.';
    out += k + "threshold=" + tsv::format_shortest(r.threshold) + '\n';
    out += k + "holdin_accuracy=" + tsv::format_shortest(r.holdin_accuracy) + '\n';
    out += k + "holdout_accuracy=" + tsv::format_shortest(r.holdout_accuracy) + '\n';
    out += k + "holdout_pairs=" + std::to_string(r.holdout_pairs) + '\n';
  }
  return out;
}

std::string format_bias_table(const BiasResult& r) {
  std::string out = "folds\taccuracy\n";
  out += "disjoint\t" + pct(r.acc_disjoint) + '\n';
  out += "overlap\t" + pct(r.acc_overlapped) + '\n';
  out += "delta\t" + pct(r.delta) + '\n';
  return out;
}

std::string format_bias_kv(const BiasResult& r) {
  std::string out;
  out += "acc_disjoint=" + tsv::format_shortest(r.acc_disjoint) + '\n';
  out += "acc_overlapped=" + tsv::format_shortest(r.acc_overlapped) + '\n';
  out += "delta=" + tsv::format_shortest(r.delta) + '\n';
  return out;
}

}  // namespace fvkit
