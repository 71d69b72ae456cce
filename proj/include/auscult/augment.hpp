#pragma once

#include "auscult/spectrogram.hpp"

namespace auscult {

struct AugmentConfig {
  int batch_size = 32;
  bool mixup = true;
  int crop_bins = 10;  // reduction per axis before resizing back
  uint64_t seed = 0;
};

// Class-balanced oversampling with replacement: exactly batch/C draws per
// class, then one shuffle of the assembled batch.
inline std::vector<int> balanced_oversample(const std::vector<int>& labels,
                                            int num_classes, int batch, Rng& rng) {
  require(batch % num_classes == 0,
          "balanced_oversample: batch size must be divisible by the class count");
  std::vector<std::vector<int>> by_class(size_t(num_classes), std::vector<int>{});
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, "balanced_oversample: bad label");
    by_class[size_t(labels[i])].push_back(int(i));
  }
  std::vector<int> out;
  out.reserve(size_t(batch));
  const int per_class = batch / num_classes;
  for (int c = 0; c < num_classes; ++c) {
    require(!by_class[size_t(c)].empty(),
            "balanced_oversample: class " + std::to_string(c) + " has no samples");
    std::uniform_int_distribution<size_t> pick(0, by_class[size_t(c)].size() - 1);
    for (int k = 0; k < per_class; ++k) out.push_back(by_class[size_t(c)][pick(rng)]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// grid = r*a + (1-r)*b, soft label likewise
inline void mixup_grid(std::vector<float>& a, const std::vector<float>& b, float r) {
  require(a.size() == b.size(), "mixup: grid shape mismatch");
  for (size_t i = 0; i < a.size(); ++i) a[i] = r * a[i] + (1.0f - r) * b[i];
}

inline std::vector<float> mixup_labels(int num_classes, int class_a, int class_b,
                                       float r) {
  std::vector<float> soft(size_t(num_classes), 0.0f);
  soft[size_t(class_a)] += r;
  soft[size_t(class_b)] += 1.0f - r;
  return soft;
}

// Cuts the (F-df) x (T-dt) window at the given offsets and resizes it back to
// F x T, so downstream shapes stay constant. Offsets let one window be shared
// by the three spectrogram kinds of an item.
inline Spectrogram crop_resize(const Spectrogram& s, int df, int dt, int f0, int t0) {
  require(df >= 0 && dt >= 0 && df < s.freq_bins && dt < s.time_frames,
          "random_crop: reduction must be smaller than the grid");
  if (df == 0 && dt == 0) return s;
  require(f0 >= 0 && f0 <= df && t0 >= 0 && t0 <= dt, "random_crop: bad offsets");
  Spectrogram window;
  window.kind = s.kind;
  window.freq_bins = s.freq_bins - df;
  window.time_frames = s.time_frames - dt;
  window.values.resize(size_t(window.freq_bins) * window.time_frames);
  for (int f = 0; f < window.freq_bins; ++f)
    for (int t = 0; t < window.time_frames; ++t)
      window.at(f, t) = s.at(f + f0, t + t0);
  return rescale(window, s.freq_bins, s.time_frames);
}

inline Spectrogram random_crop(const Spectrogram& s, int df, int dt, Rng& rng) {
  require(df < s.freq_bins && dt < s.time_frames,
          "random_crop: reduction must be smaller than the grid");
  std::uniform_int_distribution<int> pf(0, df), pt(0, dt);
  const int f0 = pf(rng), t0 = pt(rng);
  return crop_resize(s, df, dt, f0, t0);
}

// One training batch after oversampling, mixup, and cropping. Grids are kept
// per spectrogram kind, each flattened [B x F x T].
struct AugmentedBatch {
  int batch = 0, freq = 0, frames = 0, classes = 0;
  std::vector<float> ga, wa, wm;
  std::vector<float> soft_labels;   // rows sum to 1
  std::vector<int> dominant_class;  // higher-ratio class after mixup
  std::vector<int> mix_partner;     // pool index, -1 without mixup
  std::vector<float> mix_ratio;
};

// Deterministic batch assembly: the rng stream is derived from (seed,
// batch_index), so a fixed seed reproduces batches bit-exactly regardless of
// how many batches were built before.
inline AugmentedBatch assemble_batch(const std::vector<const FeatureTriple*>& pool,
                                     const std::vector<int>& labels, int num_classes,
                                     const AugmentConfig& cfg, uint64_t batch_index) {
  require(pool.size() == labels.size() && !pool.empty(), "assemble_batch: empty pool");
  Rng rng(derive_seed(cfg.seed, batch_index));
  const auto idx = balanced_oversample(labels, num_classes, cfg.batch_size, rng);

  AugmentedBatch out;
  out.batch = cfg.batch_size;
  out.freq = pool[0]->ga.freq_bins;
  out.frames = pool[0]->ga.time_frames;
  out.classes = num_classes;
  const size_t grid = size_t(out.freq) * out.frames;
  out.ga.reserve(size_t(out.batch) * grid);
  out.wa.reserve(size_t(out.batch) * grid);
  out.wm.reserve(size_t(out.batch) * grid);

  std::uniform_int_distribution<int> partner_pick(0, cfg.batch_size - 1);
  std::uniform_real_distribution<float> ratio(0.0f, 1.0f);
  std::uniform_int_distribution<int> off_f(0, cfg.crop_bins),
      off_t(0, cfg.crop_bins);

  for (int b = 0; b < cfg.batch_size; ++b) {
    const int self = idx[size_t(b)];
    Spectrogram ga = pool[size_t(self)]->ga;
    Spectrogram wa = pool[size_t(self)]->wa;
    Spectrogram wm = pool[size_t(self)]->wm;
    std::vector<float> soft(size_t(num_classes), 0.0f);
    int partner = -1, dominant = labels[size_t(self)];
    float r = 1.0f;
    if (cfg.mixup) {
      partner = idx[size_t(partner_pick(rng))];
      r = ratio(rng);
      mixup_grid(ga.values, pool[size_t(partner)]->ga.values, r);
      mixup_grid(wa.values, pool[size_t(partner)]->wa.values, r);
      mixup_grid(wm.values, pool[size_t(partner)]->wm.values, r);
      soft = mixup_labels(num_classes, labels[size_t(self)], labels[size_t(partner)], r);
      dominant = r >= 0.5f ? labels[size_t(self)] : labels[size_t(partner)];
    } else {
      soft[size_t(labels[size_t(self)])] = 1.0f;
    }
    if (cfg.crop_bins > 0) {
      const int f0 = off_f(rng), t0 = off_t(rng);  // one window for all kinds
      ga = crop_resize(ga, cfg.crop_bins, cfg.crop_bins, f0, t0);
      wa = crop_resize(wa, cfg.crop_bins, cfg.crop_bins, f0, t0);
      wm = crop_resize(wm, cfg.crop_bins, cfg.crop_bins, f0, t0);
    }
    out.ga.insert(out.ga.end(), ga.values.begin(), ga.values.end());
    out.wa.insert(out.wa.end(), wa.values.begin(), wa.values.end());
    out.wm.insert(out.wm.end(), wm.values.begin(), wm.values.end());
    out.soft_labels.insert(out.soft_labels.end(), soft.begin(), soft.end());
    out.dominant_class.push_back(dominant);
    out.mix_partner.push_back(partner);
    out.mix_ratio.push_back(r);
  }
  return out;
}

}  // namespace auscult
