#include "fvkit/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "fvkit/annotation.hpp"
#include "fvkit/corpus.hpp"
#include "fvkit/error.hpp"
#include "fvkit/eval.hpp"
#include "fvkit/folds.hpp"
#include "fvkit/idclean.hpp"
#include "fvkit/overlap.hpp"
#include "fvkit/pairs.hpp"
#include "fvkit/review_service.hpp"
#include "fvkit/run_header.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Inputs are identified by file name and content hash so that headers do not
// depend on where a run happened.
json describe_input(const std::string& path) {
  return {{"file", fs::path(path).filename().string()}, {"fnv1a", fnv1a_hex(tsv::read_file(path))}};
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    tsv::write_file(path, text);
  }
}

struct PolicyFlags {
  double tau_auto = 0.5;
  double tau_id = 0.7;
  double tau_dup = 0.9;

  void add(CLI::App* app) {
    app->add_option("--tau-auto", tau_auto, "lowest similarity sent to review")->capture_default_str();
    app->add_option("--tau-id", tau_id, "identity-candidate confidence cut")->capture_default_str();
    app->add_option("--tau-dup", tau_dup, "near-duplicate cut")->capture_default_str();
  }
  ThresholdPolicy policy() const {
    ThresholdPolicy p{tau_auto, tau_id, tau_dup};
    p.validate();
    return p;
  }
  json config() const { return {{"tau_auto", tau_auto}, {"tau_id", tau_id}, {"tau_dup", tau_dup}}; }
};

struct SelectionFlags {
  double tau_genuine_min = 0.3;
  double tau_impostor_max = 0.7;
  int age_gap_max = 5;
  bool no_age_filter = false;
  std::size_t occ_max = 3;
  double attr_conf_min = 0.9;
  std::vector<std::string> targets;
  std::vector<std::string> reject_files;
  unsigned threads = 1;

  void add(CLI::App* app) {
    app->add_option("--tau-genuine-min", tau_genuine_min)->capture_default_str();
    app->add_option("--tau-impostor-max", tau_impostor_max)->capture_default_str();
    app->add_option("--age-gap-max", age_gap_max)->capture_default_str();
    app->add_flag("--no-age-filter", no_age_filter);
    app->add_option("--occ-max", occ_max, "pairs per image per label")->capture_default_str();
    app->add_option("--attr-conf-min", attr_conf_min)->capture_default_str();
    app->add_option("--target", targets, "DEM=GENUINE:IMPOSTOR; replaces the default targets");
    app->add_option("--reject", reject_files, "file of rejected pair ids")->check(CLI::ExistingFile);
    app->add_option("--threads", threads)->capture_default_str();
  }

  SelectionPolicy policy(std::map<Demographic, Targets> defaults) const {
    SelectionPolicy p;
    p.tau_genuine_min = tau_genuine_min;
    p.tau_impostor_max = tau_impostor_max;
    p.age_gap_max = no_age_filter ? std::nullopt : std::optional<int>(age_gap_max);
    p.occ_max_per_role = occ_max;
    p.attr_conf_min = attr_conf_min;
    if (targets.empty()) {
      p.targets = std::move(defaults);
    } else {
      for (const auto& t : targets) {
        const auto eq = t.find('=');
        const auto colon = t.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos) {
          throw CLI::ValidationError("--target", "expected DEM=GENUINE:IMPOSTOR, got " + t);
        }
        Targets value;
        value.genuine = static_cast<std::size_t>(tsv::parse_int(t.substr(eq + 1, colon - eq - 1), "--target"));
        value.impostor = static_cast<std::size_t>(tsv::parse_int(t.substr(colon + 1), "--target"));
        p.targets[parse_demographic(t.substr(0, eq))] = value;
      }
    }
    p.validate();
    return p;
  }

  std::set<std::string> rejected() const {
    std::set<std::string> ids;
    for (const auto& file : reject_files) {
      for (const auto& line : tsv::split(tsv::read_file(file), '\n')) {
        if (!line.empty() && line[0] != '#') ids.insert(line);
      }
    }
    return ids;
  }

  json config(const SelectionPolicy& p) const {
    json t = json::object();
    for (const auto& [d, v] : p.targets) t[std::string(to_string(d))] = {v.genuine, v.impostor};
    json rejects = json::array();
    for (const auto& file : reject_files) rejects.push_back(describe_input(file));
    return {{"tau_genuine_min", p.tau_genuine_min},
            {"tau_impostor_max", p.tau_impostor_max},
            {"age_gap_max", p.age_gap_max ? json(*p.age_gap_max) : json(nullptr)},
            {"occ_max_per_role", p.occ_max_per_role},
            {"attr_conf_min", p.attr_conf_min},
            {"targets", t},
            {"reject", rejects}};
  }
};

std::string format_split(const FinalSelection& selection) {
  std::string text = "# split\tdemographic\tlabel\ttag\tavailable\tselected\n";
  for (const auto& s : selection.split) {
    text += "# split\t" + std::string(to_string(s.demographic)) + '\t' + (s.label == PairLabel::Genuine ? "1" : "0") +
            '\t' + s.tag + '\t' + std::to_string(s.available) + '\t' + std::to_string(s.selected) + '\n';
  }
  return text;
}

// Identity lookup for pair files from a manifest alone.
void attach_identities(std::vector<VerificationPair>& pairs, const Manifest& manifest) {
  std::map<std::string, std::string> identity;
  for (const auto& r : manifest.records) identity.emplace(r.image_id, r.identity_id);
  auto lookup = [&](const std::string& image) {
    auto it = identity.find(image);
    if (it == identity.end()) throw Error(ErrorCode::MissingEmbedding, "image " + image + " not in manifest");
    return it->second;
  };
  for (auto& p : pairs) {
    p.identity_a = lookup(p.image_a);
    p.identity_b = lookup(p.image_b);
  }
}

bool pick_format(const std::string& format) { return format == "kv"; }

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fvkit: face verification dataset toolkit"};
  app.name("fvkit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::uint64_t seed = 0;
  std::string out_path;
  std::string format = "table";
  auto add_common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("-o,--out", out_path, "output file (default stdout)");
    if (seeded) sub->add_option("--seed", seed)->capture_default_str();
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format)->check(CLI::IsMember({"table", "kv"}))->capture_default_str();
  };
  std::function<void()> action;

  // ingest
  std::string emb, manifest, report_path;
  auto* ingest = app.add_subcommand("ingest", "validate, normalize and join embeddings with a manifest");
  ingest->add_option("--embeddings", emb)->required()->check(CLI::ExistingFile);
  ingest->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  ingest->add_option("-o,--out", out_path, "normalized EMB1 output")->required();
  ingest->add_option("--report", report_path, "summary output (default stdout)");
  ingest->callback([&] {
    action = [&] {
      Corpus corpus = load_corpus(emb, manifest);
      write_embeddings(corpus.embeddings(), out_path);
      const json config = {{"embeddings", describe_input(emb)}, {"manifest", describe_input(manifest)}};
      std::string text = format_run_header("ingest", config, seed);
      text += "images\t" + std::to_string(corpus.size()) + '\n';
      text += "identities\t" + std::to_string(corpus.identities().size()) + '\n';
      text += "dim\t" + std::to_string(corpus.embeddings().dim) + '\n';
      text += "output_fnv1a\t" + fnv1a_hex(serialize_embeddings(corpus.embeddings())) + '\n';
      emit(report_path, text, out);
    };
  });

  // search
  std::string test_emb, train_emb;
  std::size_t k = 2;
  unsigned threads = 1;
  auto* search = app.add_subcommand("search", "exact top-k cosine neighbours of each test image");
  search->add_option("--test", test_emb)->required()->check(CLI::ExistingFile);
  search->add_option("--train", train_emb)->required()->check(CLI::ExistingFile);
  search->add_option("-k", k)->capture_default_str();
  search->add_option("--threads", threads)->capture_default_str();
  add_common(search, false);
  search->callback([&] {
    action = [&] {
      const auto test = normalize(load_embeddings(test_emb));
      const auto train = normalize(load_embeddings(train_emb));
      const auto hits = flatten(top_k_cross(test, train, {k, threads}));
      const json config = {{"test", describe_input(test_emb)}, {"train", describe_input(train_emb)}, {"k", k}};
      emit(out_path, format_run_header("search", config, seed) + serialize_hits(hits), out);
    };
  });

  // classify
  std::string hits_path, test_manifest, train_manifest;
  PolicyFlags policy_flags;
  auto* classify = app.add_subcommand("classify", "band search hits into review candidates");
  classify->add_option("--hits", hits_path)->required()->check(CLI::ExistingFile);
  classify->add_option("--test-manifest", test_manifest, "for image paths")->check(CLI::ExistingFile);
  classify->add_option("--train-manifest", train_manifest, "for image paths")->check(CLI::ExistingFile);
  policy_flags.add(classify);
  add_common(classify, false);
  classify->callback([&] {
    action = [&] {
      const auto policy = policy_flags.policy();
      auto candidates = classify_hits(parse_hits(tsv::read_file(hits_path), hits_path), policy);
      std::erase_if(candidates, [](const Candidate& c) { return c.band == Band::Below; });
      json config = {{"hits", describe_input(hits_path)}, {"policy", policy_flags.config()}};
      if (!test_manifest.empty() || !train_manifest.empty()) {
        const Manifest test = test_manifest.empty() ? Manifest{} : load_manifest(test_manifest);
        const Manifest train = train_manifest.empty() ? Manifest{} : load_manifest(train_manifest);
        attach_image_paths(candidates, test, train);
        if (!test_manifest.empty()) config["test_manifest"] = describe_input(test_manifest);
        if (!train_manifest.empty()) config["train_manifest"] = describe_input(train_manifest);
      }
      emit(out_path, format_run_header("classify", config, seed) + serialize_candidates(candidates), out);
    };
  });

  // stats
  std::string candidates_path, log_path, matches_out;
  bool allow_override = false;
  auto* stats = app.add_subcommand("stats", "similarity distribution and confirmed overlap");
  stats->add_option("--hits", hits_path)->check(CLI::ExistingFile);
  stats->add_option("--candidates", candidates_path)->check(CLI::ExistingFile);
  stats->add_option("--log", log_path, "annotation log")->check(CLI::ExistingFile);
  stats->add_option("--test-manifest", test_manifest)->check(CLI::ExistingFile);
  stats->add_option("--train-manifest", train_manifest)->check(CLI::ExistingFile);
  stats->add_option("--matches-out", matches_out, "confirmed identity matches");
  stats->add_flag("--allow-override", allow_override, "newest decision wins between annotators");
  policy_flags.add(stats);
  add_format(stats);
  add_common(stats, false);
  stats->callback([&] {
    const bool overlap = !candidates_path.empty() || !log_path.empty();
    if (hits_path.empty() && !overlap) throw CLI::ValidationError("stats", "needs --hits or --candidates/--log");
    if (overlap && (candidates_path.empty() || log_path.empty() || test_manifest.empty() || train_manifest.empty())) {
      throw CLI::ValidationError("stats", "overlap needs --candidates, --log, --test-manifest and --train-manifest");
    }
    action = [&, overlap] {
      const auto policy = policy_flags.policy();
      json config = {{"policy", policy_flags.config()}, {"format", format}};
      std::string body;
      if (!hits_path.empty()) {
        config["hits"] = describe_input(hits_path);
        const auto summary = summarize(parse_hits(tsv::read_file(hits_path), hits_path));
        body += pick_format(format) ? format_summary_kv(summary) : format_summary_table(summary);
      }
      std::string matches_text;
      if (overlap) {
        config["candidates"] = describe_input(candidates_path);
        config["log"] = describe_input(log_path);
        config["test_manifest"] = describe_input(test_manifest);
        config["train_manifest"] = describe_input(train_manifest);
        config["allow_override"] = allow_override;
        const auto candidates = parse_candidates(tsv::read_file(candidates_path), policy, candidates_path);
        const auto replay = replay_log(log_path);
        const auto confirmed = apply_annotations(candidates, replay.records, {allow_override});
        const Manifest test = load_manifest(test_manifest);
        const Manifest train = load_manifest(train_manifest);
        body += format_overlap_report(overlap_stats(confirmed, test, train));
        matches_text = serialize_matches(confirmed_matches(confirmed, test, train));
      }
      const std::string header = format_run_header("stats", config, seed);
      emit(out_path, header + body, out);
      if (!matches_out.empty()) tsv::write_file(matches_out, header + matches_text);
    };
  });

  // clean
  std::vector<std::string> identity_files;
  DbscanParams dbscan_params;
  auto* clean = app.add_subcommand("clean", "DBSCAN label-noise filtering per identity");
  clean->add_option("--embeddings", emb)->required()->check(CLI::ExistingFile);
  clean->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  clean->add_option("--identities", identity_files, "file of identity ids (default all)")->check(CLI::ExistingFile);
  clean->add_option("--eps", dbscan_params.eps, "cosine distance radius")->capture_default_str();
  clean->add_option("--min-pts", dbscan_params.min_pts)->capture_default_str();
  clean->add_option("--threads", threads)->capture_default_str();
  add_common(clean, false);
  clean->callback([&] {
    action = [&] {
      const Corpus corpus = load_corpus(emb, manifest);
      std::vector<std::string> ids;
      json id_inputs = json::array();
      for (const auto& file : identity_files) {
        id_inputs.push_back(describe_input(file));
        for (const auto& line : tsv::split(tsv::read_file(file), '\n')) {
          if (!line.empty() && line[0] != '#') ids.push_back(line);
        }
      }
      const auto results = clean_identities(corpus, ids, dbscan_params, threads);
      const json config = {{"embeddings", describe_input(emb)},
                           {"manifest", describe_input(manifest)},
                           {"identities", id_inputs},
                           {"eps", dbscan_params.eps},
                           {"min_pts", dbscan_params.min_pts}};
      emit(out_path, format_run_header("clean", config, seed) + serialize_clean_report(results), out);
    };
  });

  // variants
  std::string matches_path, clean_path, kind = "all", out_dir;
  auto* variants = app.add_subcommand("variants", "ID-Disjoint / ID-Overlap-R / ID-Overlap-C training manifests");
  variants->add_option("--train-manifest", train_manifest)->required()->check(CLI::ExistingFile);
  variants->add_option("--matches", matches_path, "from stats --matches-out")->required()->check(CLI::ExistingFile);
  variants->add_option("--clean", clean_path, "clean report, needed for ID_OVERLAP_C")->check(CLI::ExistingFile);
  variants->add_option("--kind", kind)
      ->check(CLI::IsMember({"all", "ID_DISJOINT", "ID_OVERLAP_R", "ID_OVERLAP_C"}))
      ->capture_default_str();
  variants->add_option("--out-dir", out_dir)->required();
  variants->add_option("--seed", seed)->capture_default_str();
  variants->callback([&] {
    if ((kind == "all" || kind == "ID_OVERLAP_C") && clean_path.empty()) {
      throw CLI::ValidationError("variants", "ID_OVERLAP_C needs --clean");
    }
    action = [&] {
      const Manifest train = load_manifest(train_manifest);
      const auto matches = parse_matches(tsv::read_file(matches_path), matches_path);
      const auto cleaned =
          clean_path.empty() ? std::vector<CleanResult>{} : parse_clean_report(tsv::read_file(clean_path), clean_path);
      std::vector<VariantKind> kinds;
      if (kind == "all") {
        kinds = {VariantKind::IdDisjoint, VariantKind::IdOverlapR, VariantKind::IdOverlapC};
      } else {
        kinds = {parse_variant_kind(kind)};
      }
      std::string summary;
      for (VariantKind vk : kinds) {
        const Variant v = build_variant(train, matches, cleaned, {vk, seed});
        json config = {{"kind", std::string(to_string(vk))},
                       {"train_manifest", describe_input(train_manifest)},
                       {"matches", describe_input(matches_path)}};
        if (!clean_path.empty()) config["clean"] = describe_input(clean_path);
        const std::string header = format_run_header("variants", config, seed);
        const std::string name(to_string(vk));
        tsv::write_file(fs::path(out_dir) / (name + ".tsv"), header + serialize_manifest(v.manifest));
        tsv::write_file(fs::path(out_dir) / (name + ".diff.tsv"), header + serialize_variant_diff(v));
        std::set<std::string> identities;
        for (const auto& r : v.manifest.records) identities.insert(r.identity_id);
        summary += name + "\timages=" + std::to_string(v.manifest.records.size()) +
                   "\tidentities=" + std::to_string(identities.size()) +
                   "\tremoved_identities=" + std::to_string(v.removed_identities.size()) + '\n';
      }
      out << summary;
    };
  });

  // pairs-hadrian / pairs-eclipse
  SelectionFlags selection_flags;
  std::vector<std::string> tails;
  auto pairs_action = [&](bool eclipse) {
    const Corpus corpus = load_corpus(emb, manifest);
    const SelectionPolicy policy =
        selection_flags.policy(eclipse ? eclipse_default_targets() : hadrian_default_targets());
    json config = {{"embeddings", describe_input(emb)},
                   {"manifest", describe_input(manifest)},
                   {"selection", selection_flags.config(policy)}};
    PairBuild build;
    if (eclipse) {
      EclipseConfig ec;
      for (const auto& t : tails) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--tail", "expected DEM=FRACTION, got " + t);
        ec.pools.tail_fraction[parse_demographic(t.substr(0, eq))] = tsv::parse_double(t.substr(eq + 1), "--tail");
      }
      json tf = json::object();
      for (const auto& [d, f] : ec.pools.tail_fraction) tf[std::string(to_string(d))] = f;
      config["tail_fraction"] = tf;
      build = build_eclipse(corpus, policy, ec, selection_flags.rejected(), selection_flags.threads);
    } else {
      build = build_hadrian(corpus, policy, HadrianConfig{}, selection_flags.rejected(), selection_flags.threads);
    }
    std::string text = format_run_header(eclipse ? "pairs-eclipse" : "pairs-hadrian", config, seed);
    text += "# enumerated: " + std::to_string(build.enumerated) + '\n';
    text += "# filtered: " + std::to_string(build.filtered) + '\n';
    text += format_split(build.selection);
    emit(out_path, text + serialize_pairs(build.selection.pairs), out);
  };
  for (bool eclipse : {false, true}) {
    auto* sub = app.add_subcommand(eclipse ? "pairs-eclipse" : "pairs-hadrian",
                                   eclipse ? "exposure-tail verification pairs" : "facial-hair verification pairs");
    sub->add_option("--embeddings", emb)->required()->check(CLI::ExistingFile);
    sub->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    if (eclipse) sub->add_option("--tail", tails, "DEM=FRACTION exposure tail size");
    selection_flags.add(sub);
    add_common(sub, false);
    sub->callback([&, eclipse] { action = [&, eclipse] { pairs_action(eclipse); }; });
  }

  // folds
  std::string pairs_path;
  int n_folds = 10;
  bool overlapped = false, no_balance = false;
  auto* folds = app.add_subcommand("folds", "identity-disjoint cross-validation folds");
  folds->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
  folds->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  folds->add_option("--n-folds", n_folds)->capture_default_str();
  folds->add_flag("--overlapped", overlapped, "spread each identity across folds instead");
  folds->add_flag("--no-balance", no_balance, "do not balance demographics per fold");
  folds->add_option("--report", report_path, "fold report (default stdout)");
  add_common(folds, true);
  folds->callback([&] {
    action = [&] {
      auto pairs = parse_pairs(tsv::read_file(pairs_path), pairs_path);
      attach_identities(pairs, load_manifest(manifest));
      const FoldAssignment assignment = overlapped ? overlapped_folds(pairs, n_folds, seed, !no_balance)
                                                   : build_folds(pairs, n_folds, !no_balance);
      FoldChecks checks;
      checks.identity_disjoint = !overlapped;
      checks.demographic_balance = !no_balance;
      const FoldReport report = verify_folds(pairs, assignment, checks);
      apply_assignment(pairs, assignment);
      const json config = {{"pairs", describe_input(pairs_path)},
                           {"manifest", describe_input(manifest)},
                           {"n_folds", n_folds},
                           {"overlapped", overlapped},
                           {"balance", !no_balance}};
      const std::string header = format_run_header("folds", config, seed);
      emit(out_path, header + serialize_pairs(pairs), out);
      emit(report_path, header + format_fold_report(pairs, assignment, report), out);
      if (!report.pass()) throw Error(ErrorCode::InfeasiblePacking, "fold assignment failed verification");
    };
  });

  // eval / bias
  bool grid = false;
  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
    sub->add_option("--embeddings", emb)->required()->check(CLI::ExistingFile);
    sub->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    sub->add_option("--n-folds", n_folds)->capture_default_str();
    sub->add_flag("--grid", grid, "fixed 0.01 threshold grid instead of exact midpoints");
    sub->add_option("--threads", threads)->capture_default_str();
    add_format(sub);
  };
  auto eval_inputs = [&] {
    return json{{"pairs", describe_input(pairs_path)},
                {"embeddings", describe_input(emb)},
                {"manifest", describe_input(manifest)},
                {"n_folds", n_folds},
                {"search", grid ? "fixed_grid" : "exact_midpoint"},
                {"format", format}};
  };
  auto* eval = app.add_subcommand("eval", "leave-one-fold-out verification accuracy");
  add_eval(eval);
  add_common(eval, false);
  eval->callback([&] {
    action = [&] {
      const Corpus corpus = load_corpus(emb, manifest);
      auto pairs = parse_pairs(tsv::read_file(pairs_path), pairs_path);
      const auto distances = pair_distances(pairs, corpus);
      const EvalOptions options{grid ? ThresholdSearch::FixedGrid : ThresholdSearch::ExactMidpoint, threads};
      const EvalReport report = cross_validate(pairs, assignment_from_pairs(pairs, n_folds), distances, options);
      const std::string body = pick_format(format) ? format_eval_kv(report) : format_eval_table(report);
      emit(out_path, format_run_header("eval", eval_inputs(), seed) + body, out);
    };
  });

  auto* bias = app.add_subcommand("bias", "accuracy under identity-disjoint versus identity-spread folds");
  add_eval(bias);
  bias->add_flag("--no-balance", no_balance);
  add_common(bias, true);
  bias->callback([&] {
    action = [&] {
      const Corpus corpus = load_corpus(emb, manifest);
      auto pairs = parse_pairs(tsv::read_file(pairs_path), pairs_path);
      attach_identities(pairs, corpus);
      const auto distances = pair_distances(pairs, corpus);
      const EvalOptions options{grid ? ThresholdSearch::FixedGrid : ThresholdSearch::ExactMidpoint, threads};
      const BiasResult result = bias_experiment(pairs, distances, n_folds, seed, !no_balance, options);
      json config = eval_inputs();
      config["balance"] = !no_balance;
      const std::string body = pick_format(format) ? format_bias_kv(result) : format_bias_table(result);
      emit(out_path, format_run_header("bias", config, seed) + body, out);
    };
  });

  // review-serve
  std::string images_root, static_dir, host = "127.0.0.1";
  int port = -1;
  auto* serve = app.add_subcommand("review-serve", "HTTP annotation service for the review UI");
  serve->add_option("--candidates", candidates_path)->required()->check(CLI::ExistingFile);
  serve->add_option("--log", log_path, "annotation log, created if missing")->required();
  serve->add_option("--images-root", images_root, "base for relative image paths (default: candidates dir)");
  serve->add_option("--static-dir", static_dir, "built UI assets")->check(CLI::ExistingDirectory);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "default $FVKIT_REVIEW_PORT or 8080");
  policy_flags.add(serve);
  serve->callback([&] {
    action = [&] {
      if (port < 0) {
        const char* env = std::getenv("FVKIT_REVIEW_PORT");
        port = env ? static_cast<int>(tsv::parse_int(env, "FVKIT_REVIEW_PORT")) : 8080;
      }
      ReviewConfig config;
      config.candidates = candidates_path;
      config.log = log_path;
      config.images_root = images_root.empty() ? fs::path(candidates_path).parent_path() : fs::path(images_root);
      config.static_dir = static_dir;
      config.policy = policy_flags.policy();
      ReviewService service(std::move(config));
      const int bound = service.bind(host, port);
      out << "replayed " << service.replayed_records() << " decisions";
      if (service.skipped_log_lines() > 0) out << " (skipped " << service.skipped_log_lines() << " bad lines)";
      out << "\nlistening on http://" << host << ':' << bound << std::endl;
      service.listen();
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "fvkit: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  } catch (const Error& e) {
    err << "fvkit: " << e.what() << '\n';
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "fvkit: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "fvkit: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "fvkit: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fvkit
