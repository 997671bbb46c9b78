#include "fvkit/review_service.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>

#include "fvkit/error.hpp"
#include "fvkit/tsv.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fvkit {

using nlohmann::json;

ReviewState::ReviewState(std::vector<Candidate> candidates) : candidates_(std::move(candidates)) {
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    const auto& c = candidates_[i];
    if (!index_.emplace(c.pair_id, i).second) {
      throw Error(ErrorCode::DuplicateImageId, "duplicate candidate pair " + c.pair_id);
    }
    if (!c.test_image_path.empty()) image_paths_.emplace(c.test_image_id, c.test_image_path);
    if (!c.train_image_path.empty()) image_paths_.emplace(c.train_image_id, c.train_image_path);
  }
  review_order_.resize(candidates_.size());
  for (std::size_t i = 0; i < review_order_.size(); ++i) review_order_[i] = i;
  std::sort(review_order_.begin(), review_order_.end(), [&](std::size_t a, std::size_t b) {
    if (candidates_[a].score != candidates_[b].score) return candidates_[a].score > candidates_[b].score;
    return candidates_[a].pair_id < candidates_[b].pair_id;
  });
}

ReviewState::DecisionResult ReviewState::check(const AnnotationRecord& record) const {
  if (!index_.contains(record.pair_id)) return {Outcome::UnknownPair, "unknown pair " + record.pair_id};
  try {
    validate(record);
  } catch (const Error& e) {
    return {Outcome::Invalid, e.what()};
  }
  if (record.annotator.empty()) return {Outcome::Invalid, "annotator required"};
  if (auto it = decisions_.find(record.pair_id); it != decisions_.end()) {
    const AnnotationRecord& prior = it->second;
    if (prior.annotator != record.annotator && !prior.same_decision(record) && !record.override_conflict) {
      return {Outcome::Conflict, "pair already decided as " + std::string(to_string(prior.same_identity)) +
                                     (prior.same_image ? " (same image)" : "") + " by " + prior.annotator};
    }
  }
  return {Outcome::Accepted, ""};
}

void ReviewState::apply(const AnnotationRecord& record) { decisions_[record.pair_id] = record; }

void ReviewState::replay(const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) {
    if (index_.contains(r.pair_id)) apply(r);
  }
}

const Candidate* ReviewState::find(const std::string& pair_id) const {
  auto it = index_.find(pair_id);
  return it == index_.end() ? nullptr : &candidates_[it->second];
}

const AnnotationRecord* ReviewState::decision(const std::string& pair_id) const {
  auto it = decisions_.find(pair_id);
  return it == decisions_.end() ? nullptr : &it->second;
}

const Candidate* ReviewState::next_pending() const {
  for (std::size_t i : review_order_) {
    if (!decisions_.contains(candidates_[i].pair_id)) return &candidates_[i];
  }
  return nullptr;
}

std::optional<std::string> ReviewState::image_path(const std::string& image_id) const {
  auto it = image_paths_.find(image_id);
  if (it == image_paths_.end()) return std::nullopt;
  return it->second;
}

ReviewState::Progress ReviewState::progress() const {
  Progress p;
  p.total = candidates_.size();
  for (Band b : {Band::Below, Band::CandidateIdentity, Band::CandidateDuplicate}) p.by_band[std::string(to_string(b))];
  for (const char* d : {"same", "same_image", "different", "unsure"}) p.by_decision[d] = 0;
  for (const auto& c : candidates_) {
    auto& band = p.by_band[std::string(to_string(c.band))];
    ++band.first;
    const AnnotationRecord* d = decision(c.pair_id);
    if (!d) continue;
    ++band.second;
    ++p.annotated;
    ++p.by_decision[std::string(to_string(d->same_identity))];
    if (d->same_image) ++p.by_decision["same_image"];
  }
  return p;
}

struct ReviewService::Http {
  httplib::Server server;
};

namespace {

json decision_json(const AnnotationRecord& d) {
  return json{{"same_identity", std::string(to_string(d.same_identity))},
              {"same_image", d.same_image},
              {"annotator", d.annotator},
              {"timestamp", d.timestamp}};
}

json pair_json(const Candidate& c, const AnnotationRecord* d) {
  json j{{"pair_id", c.pair_id},
         {"test_image_id", c.test_image_id},
         {"train_image_id", c.train_image_id},
         {"score", tsv::format_fixed(c.score, 6)},
         {"band", std::string(to_string(c.band))},
         {"low_confidence", c.low_confidence},
         {"test_image_url", "/api/image?id=" + httplib::detail::encode_query_param(c.test_image_id)},
         {"train_image_url", "/api/image?id=" + httplib::detail::encode_query_param(c.train_image_id)}};
  j["decision"] = d ? decision_json(*d) : json(nullptr);
  return j;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

std::string content_type_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

ReviewService::ReviewService(ReviewConfig config)
    : config_(std::move(config)),
      state_(parse_candidates(tsv::read_file(config_.candidates), config_.policy, config_.candidates.string())),
      log_(config_.log),
      http_(std::make_unique<Http>()) {
  const LogReplay replay = replay_log(config_.log);
  state_.replay(replay.records);
  replayed_ = replay.records.size();
  skipped_ = replay.skipped_lines;
  if (!config_.clock) {
    config_.clock = [] {
      return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
  }
  install_routes();
}

ReviewService::~ReviewService() { stop(); }

void ReviewService::install_routes() {
  auto& svr = http_->server;

  svr.Get("/api/pairs/next", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex_);
    const Candidate* c = state_.next_pending();
    if (!c) {
      res.status = 204;
      return;
    }
    reply(res, 200, pair_json(*c, nullptr));
  });

  svr.Get(R"(/api/pairs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(mutex_);
    const std::string id = req.matches[1];
    const Candidate* c = state_.find(id);
    if (!c) return fail(res, 404, "unknown pair " + id);
    reply(res, 200, pair_json(*c, state_.decision(id)));
  });

  svr.Post(R"(/api/pairs/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (!body.is_object()) return fail(res, 400, "body must be a JSON object");
    AnnotationRecord rec;
    rec.pair_id = id;
    const auto same = body.find("same_identity");
    if (same == body.end() || !same->is_string()) return fail(res, 400, "same_identity must be a string");
    const auto parsed = parse_same_identity(same->get<std::string>());
    if (!parsed) return fail(res, 400, "same_identity must be same, different or unsure");
    rec.same_identity = *parsed;
    if (auto it = body.find("same_image"); it != body.end() && !it->is_null()) {
      if (!it->is_boolean()) return fail(res, 400, "same_image must be a boolean");
      rec.same_image = it->get<bool>();
    }
    const auto annotator = body.find("annotator");
    if (annotator == body.end() || !annotator->is_string()) return fail(res, 400, "annotator must be a string");
    rec.annotator = annotator->get<std::string>();
    if (auto it = body.find("override"); it != body.end()) {
      if (!it->is_boolean()) return fail(res, 400, "override must be a boolean");
      rec.override_conflict = it->get<bool>();
    }
    if (req.has_param("override") && req.get_param_value("override") == "1") rec.override_conflict = true;

    std::unique_lock lock(mutex_);
    const auto verdict = state_.check(rec);
    switch (verdict.outcome) {
      case ReviewState::Outcome::UnknownPair: return fail(res, 404, verdict.message);
      case ReviewState::Outcome::Invalid: return fail(res, 400, verdict.message);
      case ReviewState::Outcome::Conflict: return fail(res, 409, verdict.message);
      case ReviewState::Outcome::Accepted: break;
    }
    // Only flag an override that actually replaced someone else's decision.
    if (const AnnotationRecord* prior = state_.decision(id);
        !prior || prior->annotator == rec.annotator || prior->same_decision(rec)) {
      rec.override_conflict = false;
    }
    rec.timestamp = config_.clock();
    try {
      log_.append(rec);
    } catch (const Error& e) {
      return fail(res, 500, e.what());
    }
    state_.apply(rec);
    reply(res, 200, pair_json(*state_.find(id), state_.decision(id)));
  });

  svr.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex_);
    const auto p = state_.progress();
    json bands = json::object();
    for (const auto& [band, counts] : p.by_band) bands[band] = {{"total", counts.first}, {"annotated", counts.second}};
    json decisions = json::object();
    for (const auto& [d, n] : p.by_decision) decisions[d] = n;
    reply(res, 200,
          json{{"total", p.total},
               {"annotated", p.annotated},
               {"pending", p.total - p.annotated},
               {"by_band", bands},
               {"by_decision", decisions}});
  });

  svr.Get("/api/image", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("id")) return fail(res, 400, "missing id");
    const std::string id = req.get_param_value("id");
    std::optional<std::string> path;
    {
      std::shared_lock lock(mutex_);
      path = state_.image_path(id);
    }
    if (!path) return fail(res, 404, "no image path for " + id);
    std::filesystem::path full(*path);
    if (full.is_relative() && !config_.images_root.empty()) full = config_.images_root / full;
    std::string bytes;
    try {
      bytes = tsv::read_file(full);
    } catch (const Error&) {
      return fail(res, 404, "image not readable: " + full.string());
    }
    res.status = 200;
    res.set_content(bytes, content_type_for(full));
  });

  if (!config_.static_dir.empty()) svr.set_mount_point("/", config_.static_dir.string());
}

int ReviewService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return bound;
  }
  if (!http_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ReviewService::listen() { http_->server.listen_after_bind(); }

void ReviewService::stop() {
  if (http_) http_->server.stop();
}

}  // namespace fvkit
