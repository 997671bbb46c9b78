#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fvkit/annotation.hpp"
#include "fvkit/overlap.hpp"

namespace fvkit {

// Decision state of the review workflow. Rebuilt by replaying the annotation
// log; every accepted decision goes to the log before the state changes.
class ReviewState {
 public:
  explicit ReviewState(std::vector<Candidate> candidates);

  enum class Outcome { Accepted, UnknownPair, Conflict, Invalid };

  struct DecisionResult {
    Outcome outcome;
    std::string message;
  };

  // Validation and conflict rules only; does not persist.
  DecisionResult check(const AnnotationRecord& record) const;
  void apply(const AnnotationRecord& record);
  // Log records are authoritative: each replaces the previous decision.
  void replay(const std::vector<AnnotationRecord>& records);

  const std::vector<Candidate>& candidates() const { return candidates_; }
  const Candidate* find(const std::string& pair_id) const;
  const AnnotationRecord* decision(const std::string& pair_id) const;
  // Highest score first among undecided candidates; ties by pair id.
  const Candidate* next_pending() const;
  // image_id -> path, from both sides of the candidates.
  std::optional<std::string> image_path(const std::string& image_id) const;

  struct Progress {
    std::size_t total = 0;
    std::size_t annotated = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_band;  // band -> (total, annotated)
    std::map<std::string, std::size_t> by_decision;
  };
  Progress progress() const;

 private:
  std::vector<Candidate> candidates_;
  std::vector<std::size_t> review_order_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, AnnotationRecord> decisions_;
  std::map<std::string, std::string> image_paths_;
};

struct ReviewConfig {
  std::filesystem::path candidates;
  std::filesystem::path log;
  std::filesystem::path images_root;  // base for relative image paths
  std::filesystem::path static_dir;   // UI assets; optional
  ThresholdPolicy policy;
  std::function<std::int64_t()> clock;  // UTC seconds; system clock when empty
};

// HTTP+JSON front end for ReviewState.
//   GET  /api/pairs/next            next undecided candidate (204 when done)
//   GET  /api/pairs/{id}            one candidate with its decision
//   POST /api/pairs/{id}/decision   {same_identity, same_image, annotator, override}
//   GET  /api/progress              counts by band and decision
//   GET  /api/image?id=...          image bytes
class ReviewService {
 public:
  explicit ReviewService(ReviewConfig config);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

  std::size_t replayed_records() const { return replayed_; }
  std::size_t skipped_log_lines() const { return skipped_; }

 private:
  struct Http;
  void install_routes();

  ReviewConfig config_;
  ReviewState state_;
  AnnotationLog log_;
  mutable std::shared_mutex mutex_;
  std::unique_ptr<Http> http_;
  std::size_t replayed_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace fvkit
