#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fvkit/annotation.hpp"
#include "fvkit/corpus.hpp"

namespace fvkit::synthetic {

// Knobs for the bundled fixture: a train/test pair of corpora with planted
// identity overlap, near-duplicate images, split train identities and
// label noise, plus a subject pool with demographics, ages, exposure and
// facial-hair attributes for pair selection.
struct Options {
  std::uint64_t seed = 7;
  std::uint32_t dim = 64;

  std::size_t train_identities = 60;
  std::size_t train_images_per_identity = 6;
  std::size_t test_identities = 30;
  std::size_t test_images_per_identity = 3;
  std::size_t overlapped_people = 12;  // test people also present in train
  std::size_t split_people = 3;        // of those, people filed as two train identities
  std::size_t duplicate_images = 8;    // test images that are near-copies of train images
  std::size_t lookalike_people = 3;    // train people resembling unmatched test people
  std::size_t noisy_train_images = 2;  // mislabeled images per overlapped train identity

  std::size_t subject_identities_per_demographic = 160;
  std::size_t subject_images_per_identity = 12;
  double subject_sigma = 0.7;   // within-identity noise radius
};

struct Fixture {
  EmbeddingSet test;
  Manifest test_manifest;
  EmbeddingSet train;
  Manifest train_manifest;
  EmbeddingSet subjects;
  Manifest subjects_manifest;
  // Ground-truth review of every test/train top-2 candidate at or above 0.5.
  std::vector<AnnotationRecord> annotations;
};

Fixture make_fixture(const Options& options = {});

// Writes test.emb, test.tsv, train.emb, train.tsv, subjects.emb,
// subjects.tsv and annotations.log into `dir`.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace fvkit::synthetic
