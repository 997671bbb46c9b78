#include "fvkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fvkit/overlap.hpp"
#include "fvkit/random.hpp"
#include "fvkit/simsearch.hpp"
#include "fvkit/tsv.hpp"

namespace fvkit::synthetic {

namespace {

using Vec = std::vector<double>;

Vec random_unit(Rng& rng, std::uint32_t dim) {
  Vec v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  for (auto& x : v) x /= std::sqrt(sq);
  return v;
}

Vec jitter(Rng& rng, const Vec& center, double sigma) {
  Vec v = center;
  const double per_coord = sigma / std::sqrt(static_cast<double>(center.size()));
  for (auto& x : v) x += per_coord * rng.normal();
  return v;
}

void add_scaled(Vec& v, const Vec& dir, double amount) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += amount * dir[i];
}

// Stored unnormalized with a random positive scale so ingest has work to do.
void push_row(Rng& rng, EmbeddingSet& set, const std::string& id, const Vec& v) {
  const double scale = 0.5 + 4.0 * rng.uniform();
  set.ids.push_back(id);
  for (double x : v) set.data.push_back(static_cast<float>(x * scale));
}

std::string pad(std::size_t i, int width = 4) {
  std::string s = std::to_string(i);
  if (s.size() < static_cast<std::size_t>(width)) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

ImageRecord plain_record(const std::string& image, const std::string& identity, const std::string& folder) {
  ImageRecord r;
  r.image_id = image;
  r.identity_id = identity;
  r.image_path = folder + "/" + image + ".png";
  return r;
}

}  // namespace

Fixture make_fixture(const Options& o) {
  Rng rng(o.seed);
  Fixture f;
  f.test.dim = f.train.dim = f.subjects.dim = o.dim;

  // People 0..overlapped_people-1 appear in both sets.
  const std::size_t n_people = o.train_identities + o.test_identities;
  std::vector<Vec> people;
  for (std::size_t i = 0; i < n_people; ++i) people.push_back(random_unit(rng, o.dim));
  // Lookalikes: distinct train people placed near unmatched test people.
  for (std::size_t j = 0; j < o.lookalike_people; ++j) {
    const std::size_t p = o.overlapped_people + j;
    Vec& v = people[o.test_identities + j];
    double sq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = 0.8 * people[p][i] + 0.6 * v[i];
      sq += v[i] * v[i];
    }
    for (auto& x : v) x /= std::sqrt(sq);
  }
  constexpr double kSigma = 0.6;

  // Train: identity index -> person; split people take two identities.
  std::vector<std::size_t> train_person;
  for (std::size_t p = 0; p < o.overlapped_people; ++p) {
    train_person.push_back(p);
    if (p < o.split_people) train_person.push_back(p);
  }
  for (std::size_t p = o.test_identities; train_person.size() < o.train_identities; ++p) train_person.push_back(p);

  std::map<std::string, std::size_t> truth;  // image id -> person
  std::vector<std::pair<std::string, Vec>> train_images;
  for (std::size_t t = 0; t < train_person.size(); ++t) {
    const std::string identity = "m" + pad(t);
    for (std::size_t k = 0; k < o.train_images_per_identity; ++k) {
      const std::string image = identity + "_" + pad(k, 2);
      std::size_t person = train_person[t];
      // Mislabeled images inside overlapped identities.
      if (person < o.overlapped_people && k < o.noisy_train_images) {
        person = o.test_identities + (t * 7 + k) % (n_people - o.test_identities);
      }
      Vec v = jitter(rng, people[person], kSigma);
      truth[image] = person;
      train_images.emplace_back(image, v);
      push_row(rng, f.train, image, v);
      f.train_manifest.records.push_back(plain_record(image, identity, "train"));
    }
  }

  std::map<std::string, std::string> duplicate_source;  // test image -> train image
  std::size_t duplicates_left = o.duplicate_images;
  for (std::size_t p = 0; p < o.test_identities; ++p) {
    const std::string identity = "t" + pad(p);
    for (std::size_t k = 0; k < o.test_images_per_identity; ++k) {
      const std::string image = identity + "_" + pad(k, 2);
      Vec v;
      if (p < o.overlapped_people && k == 0 && duplicates_left > 0) {
        // Recompressed copy of one of the person's clean train images.
        const auto& src = *std::find_if(train_images.begin(), train_images.end(), [&](const auto& item) {
          return truth[item.first] == p && item.first.substr(item.first.size() - 2) >=
                                               pad(o.noisy_train_images, 2);
        });
        v = jitter(rng, src.second, 0.05);
        truth[image] = p;
        --duplicates_left;
        duplicate_source[image] = src.first;
      } else {
        v = jitter(rng, people[p], kSigma);
        truth[image] = p;
      }
      push_row(rng, f.test, image, v);
      f.test_manifest.records.push_back(plain_record(image, identity, "test"));
    }
  }

  // Simulated reviewer: ground truth for every candidate at or above 0.5.
  const auto hits = flatten(top_k_cross(normalize(f.test), normalize(f.train), {2, 1}));
  const auto candidates = classify_hits(hits, ThresholdPolicy{});
  std::int64_t clock = 1700000000;
  for (const auto& c : candidates) {
    if (c.band == Band::Below) continue;
    AnnotationRecord r;
    r.pair_id = c.pair_id;
    const bool same = truth.at(c.test_image_id) == truth.at(c.train_image_id);
    r.same_identity = same ? SameIdentity::Same : SameIdentity::Different;
    auto dup = duplicate_source.find(c.test_image_id);
    r.same_image = same && dup != duplicate_source.end() && dup->second == c.train_image_id;
    r.annotator = (clock % 2 == 0) ? "annotator-a" : "annotator-b";
    r.timestamp = clock++;
    f.annotations.push_back(std::move(r));
  }
  // One borderline pair left unsure.
  for (auto& r : f.annotations) {
    if (r.same_identity == SameIdentity::Different) {
      r.same_identity = SameIdentity::Unsure;
      break;
    }
  }

  // Subject pool for pair selection.
  const Vec beard = random_unit(rng, o.dim);
  const Vec light = random_unit(rng, o.dim);
  f.subjects_manifest.attribute_names = {"clean_shaven", "full_beard", "mustache"};
  std::size_t subject = 0;
  for (Demographic d : {Demographic::AAM, Demographic::AAF, Demographic::CM, Demographic::CF}) {
    const bool male = d == Demographic::AAM || d == Demographic::CM;
    for (std::size_t s = 0; s < o.subject_identities_per_demographic; ++s, ++subject) {
      const std::string identity = "s" + pad(subject, 5);
      const Vec center = random_unit(rng, o.dim);
      const int base_age = 18 + static_cast<int>(rng.below(45));
      for (std::size_t k = 0; k < o.subject_images_per_identity; ++k) {
        const std::string image = identity + "_" + pad(k, 2);
        ImageRecord r = plain_record(image, identity, "subjects");
        r.demographic = d;
        r.age = base_age + static_cast<int>(rng.below(8));
        r.exposure = rng.normal();
        const bool full_hair = male && k % 2 == 1;
        // A few images carry ambiguous attribute confidences.
        const double sure = rng.uniform() < 0.1 ? 0.8 : 0.9 + 0.1 * rng.uniform();
        r.attributes["clean_shaven"] = full_hair ? 1.0 - sure : sure;
        r.attributes["mustache"] = full_hair ? sure : 1.0 - sure;
        r.attributes["full_beard"] = full_hair ? sure : 1.0 - sure;
        Vec v = jitter(rng, center, o.subject_sigma);
        if (full_hair) add_scaled(v, beard, 0.3);
        add_scaled(v, light, 0.1 * *r.exposure);
        push_row(rng, f.subjects, image, v);
        f.subjects_manifest.records.push_back(std::move(r));
      }
    }
  }
  for (auto* m : {&f.test_manifest, &f.train_manifest}) {
    for (auto& r : m->records) r.demographic = Demographic::OTHER;
  }
  return f;
}

void write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_embeddings(f.test, dir / "test.emb");
  write_embeddings(f.train, dir / "train.emb");
  write_embeddings(f.subjects, dir / "subjects.emb");
  tsv::write_file(dir / "test.tsv", serialize_manifest(f.test_manifest));
  tsv::write_file(dir / "train.tsv", serialize_manifest(f.train_manifest));
  tsv::write_file(dir / "subjects.tsv", serialize_manifest(f.subjects_manifest));
  std::string log;
  for (const auto& r : f.annotations) log += to_log_line(r) + '\n';
  tsv::write_file(dir / "annotations.log", log);
}

}  // namespace fvkit::synthetic
