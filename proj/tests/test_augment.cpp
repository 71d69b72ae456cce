#include <catch2/catch_amalgamated.hpp>

#include "auscult/augment.hpp"

using namespace auscult;

namespace {

Spectrogram make_grid(int F, int T, float base, SpecKind kind) {
  Spectrogram s;
  s.kind = kind;
  s.freq_bins = F;
  s.time_frames = T;
  s.values.resize(size_t(F) * T);
  for (size_t i = 0; i < s.values.size(); ++i)
    s.values[i] = base + 0.01f * float(i % 37);
  return s;
}

FeatureTriple make_item(int F, int T, float base, int label) {
  FeatureTriple ft;
  ft.ga = make_grid(F, T, base, SpecKind::GA);
  ft.wa = make_grid(F, T, base + 0.5f, SpecKind::WA);
  ft.wm = make_grid(F, T, base + 1.0f, SpecKind::WM);
  ft.label = label;
  return ft;
}

}  // namespace

TEST_CASE("balanced_oversample draws batch/C per class") {
  std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  Rng rng(1);
  auto idx = balanced_oversample(labels, 2, 8, rng);
  REQUIRE(idx.size() == 8);
  int c0 = 0, c1 = 0;
  for (int i : idx) (labels[size_t(i)] == 0 ? c0 : c1)++;
  CHECK(c0 == 4);
  CHECK(c1 == 4);
}

TEST_CASE("minority classes repeat via replacement") {
  std::vector<int> labels(103, 0);
  labels[100] = labels[101] = labels[102] = 1;
  Rng rng(5);
  auto idx = balanced_oversample(labels, 2, 10, rng);
  int minority = 0;
  for (int i : idx)
    if (labels[size_t(i)] == 1) minority++;
  CHECK(minority == 5);
}

TEST_CASE("oversampling is deterministic for a fixed seed") {
  std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  Rng a(42), b(42);
  CHECK(balanced_oversample(labels, 3, 9, a) == balanced_oversample(labels, 3, 9, b));
}

TEST_CASE("an empty class is reported by name") {
  std::vector<int> labels = {0, 0, 2, 2};
  Rng rng(1);
  try {
    balanced_oversample(labels, 3, 6, rng);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("batch size must divide by the class count") {
  std::vector<int> labels = {0, 1, 2};
  Rng rng(1);
  CHECK_THROWS_AS(balanced_oversample(labels, 3, 10, rng), ValidationError);
}

TEST_CASE("mixup at r=1 returns the first grid exactly") {
  auto a = make_item(8, 9, 0.0f, 0);
  auto b = make_item(8, 9, 3.0f, 1);
  auto ga = a.ga.values;
  mixup_grid(ga, b.ga.values, 1.0f);
  CHECK(ga == a.ga.values);
  auto soft = mixup_labels(4, 0, 1, 1.0f);
  CHECK(soft == std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f});
}

TEST_CASE("mixup at r=0.5 yields a half-half soft label") {
  auto soft = mixup_labels(2, 0, 1, 0.5f);
  CHECK_THAT(soft[0], Catch::Matchers::WithinAbs(0.5, 1e-7));
  CHECK_THAT(soft[1], Catch::Matchers::WithinAbs(0.5, 1e-7));
}

TEST_CASE("mixup interpolates every cell") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  std::vector<float> a(64), b(64);
  for (auto& v : a) v = d(rng);
  for (auto& v : b) v = d(rng);
  auto a0 = a;
  mixup_grid(a, b, 0.3f);
  for (size_t i = 0; i < a.size(); ++i)
    REQUIRE_THAT(a[i], Catch::Matchers::WithinAbs(0.3f * a0[i] + 0.7f * b[i], 1e-6));
}

TEST_CASE("mixup with the same class keeps a one-hot label") {
  auto soft = mixup_labels(3, 2, 2, 0.37f);
  CHECK_THAT(soft[2], Catch::Matchers::WithinAbs(1.0, 1e-7));
}

TEST_CASE("zero crop is the identity") {
  auto s = make_grid(12, 14, 0.2f, SpecKind::GA);
  Rng rng(1);
  Spectrogram c = random_crop(s, 0, 0, rng);
  CHECK(c.values == s.values);
}

TEST_CASE("cropping a constant grid preserves the constant") {
  Spectrogram s;
  s.freq_bins = 20;
  s.time_frames = 30;
  s.values.assign(600, 2.5f);
  Rng rng(9);
  Spectrogram c = random_crop(s, 10, 10, rng);
  REQUIRE(c.freq_bins == 20);
  REQUIRE(c.time_frames == 30);
  for (float v : c.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(2.5, 1e-6));
}

TEST_CASE("crop takes a 10-bin reduced window and restores the shape") {
  // corner samples of the output equal the window corners before resize
  Spectrogram s = make_grid(128, 155, 0.0f, SpecKind::GA);
  Spectrogram c = crop_resize(s, 10, 10, 4, 7);
  REQUIRE(c.freq_bins == 128);
  REQUIRE(c.time_frames == 155);
  CHECK(c.at(0, 0) == s.at(4, 7));                    // window = 118 x 145
  CHECK(c.at(127, 154) == s.at(4 + 117, 7 + 144));
}

TEST_CASE("crop rejects windows larger than the grid") {
  auto s = make_grid(8, 8, 0.0f, SpecKind::GA);
  Rng rng(1);
  CHECK_THROWS_AS(random_crop(s, 8, 2, rng), ValidationError);
}

TEST_CASE("assembled batches have convex soft labels and aligned kinds") {
  std::vector<FeatureTriple> pool;
  std::vector<int> labels;
  for (int i = 0; i < 9; ++i) {
    pool.push_back(make_item(16, 20, float(i) * 0.3f, i % 3));
    labels.push_back(i % 3);
  }
  std::vector<const FeatureTriple*> refs;
  for (auto& p : pool) refs.push_back(&p);
  AugmentConfig cfg;
  cfg.batch_size = 6;
  cfg.crop_bins = 4;
  cfg.seed = 11;
  AugmentedBatch b = assemble_batch(refs, labels, 3, cfg, 0);
  REQUIRE(b.batch == 6);
  REQUIRE(b.ga.size() == size_t(6 * 16 * 20));
  for (int i = 0; i < b.batch; ++i) {
    double sum = 0;
    for (int c = 0; c < 3; ++c) sum += b.soft_labels[size_t(i * 3 + c)];
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK(b.mix_ratio[size_t(i)] >= 0.0f);
    CHECK(b.mix_ratio[size_t(i)] <= 1.0f);
  }
}

TEST_CASE("batch assembly is bit-identical for a fixed seed") {
  std::vector<FeatureTriple> pool;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    pool.push_back(make_item(10, 12, float(i), i % 2));
    labels.push_back(i % 2);
  }
  std::vector<const FeatureTriple*> refs;
  for (auto& p : pool) refs.push_back(&p);
  AugmentConfig cfg;
  cfg.batch_size = 4;
  cfg.crop_bins = 3;
  cfg.seed = 123;
  AugmentedBatch a = assemble_batch(refs, labels, 2, cfg, 5);
  AugmentedBatch b = assemble_batch(refs, labels, 2, cfg, 5);
  CHECK(a.ga == b.ga);
  CHECK(a.wa == b.wa);
  CHECK(a.wm == b.wm);
  CHECK(a.soft_labels == b.soft_labels);
  CHECK(a.dominant_class == b.dominant_class);
  AugmentedBatch c = assemble_batch(refs, labels, 2, cfg, 6);
  CHECK(a.ga != c.ga);  // different batch index, different stream
}

TEST_CASE("mixup and crop never exceed the input extrema") {
  std::mt19937 seed_rng(17);
  std::uniform_real_distribution<float> d(-4.0f, 4.0f);
  std::vector<FeatureTriple> pool;
  std::vector<int> labels;
  float lo = 1e30f, hi = -1e30f;
  for (int i = 0; i < 6; ++i) {
    FeatureTriple ft = make_item(14, 18, 0.0f, i % 2);
    for (auto* g : {&ft.ga, &ft.wa, &ft.wm})
      for (auto& v : g->values) {
        v = d(seed_rng);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    pool.push_back(std::move(ft));
    labels.push_back(i % 2);
  }
  std::vector<const FeatureTriple*> refs;
  for (auto& p : pool) refs.push_back(&p);
  AugmentConfig cfg;
  cfg.batch_size = 6;
  cfg.crop_bins = 5;
  cfg.seed = 99;
  AugmentedBatch b = assemble_batch(refs, labels, 2, cfg, 0);
  for (const auto* grids : {&b.ga, &b.wa, &b.wm})
    for (float v : *grids) {
      REQUIRE(v >= lo - 1e-4f);
      REQUIRE(v <= hi + 1e-4f);
    }
}
