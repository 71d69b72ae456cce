#pragma once

#include "auscult/dsp.hpp"
#include "auscult/tensor_io.hpp"

namespace auscult {

enum class SpecKind : uint8_t { GA = 0, WA = 1, WM = 2 };

inline const char* to_string(SpecKind k) {
  switch (k) {
    case SpecKind::GA: return "GA";
    case SpecKind::WA: return "WA";
    case SpecKind::WM: return "WM";
  }
  return "?";
}

// Time-frequency grid, row-major [F x T], row 0 = lowest frequency.
struct Spectrogram {
  std::vector<float> values;
  int freq_bins = 0;
  int time_frames = 0;
  SpecKind kind = SpecKind::GA;

  float& at(int f, int t) { return values[size_t(f) * time_frames + t]; }
  float at(int f, int t) const { return values[size_t(f) * time_frames + t]; }
};

enum class FeatureLevel { Event, Recording };

struct FrontendConfig {
  double sample_rate = 4000.0;
  double band_lo = 60.0, band_hi = 2000.0;
  double event_seconds = 10.0;
  double recording_seconds = 15.36;
  int channels = 128;
  int out_freq = 128;
  int event_frames = 155, recording_frames = 512;
  int frame_window = 92, frame_hop = 46;  // 23 ms window, 50% hop at 4 kHz
  double morlet_w0 = 6.0;                 // analytic Morlet center
  double morse_gamma = 3.0;               // Morse symmetry
  double morse_beta = 20.0;               // time-bandwidth P^2 = beta*gamma = 60
  double log_eps = 1e-10;
  bool standardize = true;
};

// ---------------------------------------------------------------------------
// frequency maps
// ---------------------------------------------------------------------------

inline double hz_to_erb_number(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
inline double erb_number_to_hz(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437; }
inline double erb_bandwidth(double hz) { return 24.7 * (1.0 + 0.00437 * hz); }

// ERB-spaced gammatone center frequencies spanning [lo, hi]
inline std::vector<double> gammatone_center_freqs(int channels, double lo, double hi) {
  const double e0 = hz_to_erb_number(lo), e1 = hz_to_erb_number(hi);
  std::vector<double> cf(size_t(channels), 0.0);
  for (int k = 0; k < channels; ++k)
    cf[size_t(k)] = erb_number_to_hz(e0 + (e1 - e0) * double(k) / double(channels - 1));
  return cf;
}

// log-spaced pseudo-frequencies for the wavelet scales, row 0 = lo
inline std::vector<double> cwt_pseudo_freqs(int scales, double lo, double hi) {
  std::vector<double> f(size_t(scales), 0.0);
  const double step = std::log(hi / lo) / double(scales - 1);
  for (int k = 0; k < scales; ++k) f[size_t(k)] = lo * std::exp(step * double(k));
  return f;
}

namespace detail {

inline int frame_count(int64_t n, int window, int hop) {
  if (n < window) return 1;
  return int((n - window) / hop) + 1;
}

// mean of `values` over each analysis frame, then log compression
inline void frame_log_row(const std::vector<float>& power, int window, int hop,
                          double eps, float* row, int frames) {
  const int64_t n = int64_t(power.size());
  for (int m = 0; m < frames; ++m) {
    const int64_t start = int64_t(m) * hop;
    const int64_t end = std::min<int64_t>(start + window, n);
    double acc = 0.0;
    for (int64_t i = start; i < end; ++i) acc += power[size_t(i)];
    acc /= double(std::max<int64_t>(end - start, 1));
    row[m] = float(std::log(acc + eps));
  }
}

// shared driver: filter the analytic spectrum with per-channel kernels defined
// on positive frequencies, then integrate per frame
template <typename KernelFn>
Spectrogram filterbank_spectrogram(const Waveform& w, const FrontendConfig& cfg,
                                   SpecKind kind, int channels, KernelFn&& kernel,
                                   bool energy) {
  const int64_t n = int64_t(w.samples.size());
  const int nfft = next_pow2(n + 4096);  // room for filter tails
  std::vector<std::complex<float>> spectrum(size_t(nfft), std::complex<float>(0.0f));
  for (int64_t i = 0; i < n; ++i) spectrum[size_t(i)] = w.samples[size_t(i)];
  FftEngine::instance().forward(spectrum.data(), nfft);

  const int frames = frame_count(n, cfg.frame_window, cfg.frame_hop);
  Spectrogram s;
  s.kind = kind;
  s.freq_bins = channels;
  s.time_frames = frames;
  s.values.resize(size_t(channels) * frames);

  const double df = w.rate / double(nfft);
  std::vector<std::complex<float>> y(size_t(nfft), std::complex<float>(0.0f));
  std::vector<float> detected(size_t(n), 0.0f);
  for (int ch = 0; ch < channels; ++ch) {
    std::fill(y.begin(), y.end(), std::complex<float>(0.0f));
    // analytic (one-sided) response: negative frequencies stay zero
    for (int j = 0; j <= nfft / 2; ++j) {
      const float h = float(kernel(ch, df * j));
      if (h != 0.0f) y[size_t(j)] = spectrum[size_t(j)] * h;
    }
    FftEngine::instance().inverse(y.data(), nfft);
    for (int64_t i = 0; i < n; ++i) {
      const float mag2 = std::norm(y[size_t(i)]);
      detected[size_t(i)] = energy ? mag2 : std::sqrt(mag2);
    }
    frame_log_row(detected, cfg.frame_window, cfg.frame_hop, cfg.log_eps,
                  s.values.data() + size_t(ch) * frames, frames);
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

// 4th-order gammatone filterbank, ERB-spaced centers, per-channel frame energy.
// Channel transfer functions are the exact analytic gammatone response
// (1 + i(f-fc)/b)^-4 with b = 1.019*ERB(fc), unit gain at fc.
inline Spectrogram gammatone_spectrogram(const Waveform& w, const FrontendConfig& cfg = {}) {
  require(!w.samples.empty(), "gammatone_spectrogram: empty waveform");
  const auto cf = gammatone_center_freqs(cfg.channels, cfg.band_lo, cfg.band_hi);
  std::vector<double> b(cf.size());
  for (size_t k = 0; k < cf.size(); ++k) b[k] = 1.019 * erb_bandwidth(cf[k]);
  auto kernel = [&](int ch, double f) {
    const std::complex<double> one(1.0, 0.0);
    const std::complex<double> g = one / std::pow(
        one + std::complex<double>(0.0, (f - cf[size_t(ch)]) / b[size_t(ch)]), 4.0);
    return std::abs(g) < 1e-6 ? 0.0 : std::abs(g);
  };
  return detail::filterbank_spectrogram(w, cfg, SpecKind::GA, cfg.channels, kernel,
                                        /*energy=*/true);
}

enum class Mother { Amor, Morse };

// Continuous wavelet scalogram on 128 log-spaced scales whose pseudo
// frequencies cover the analysis band; per-scale frame mean magnitude.
inline Spectrogram cwt_spectrogram(const Waveform& w, Mother mother,
                                   const FrontendConfig& cfg = {}) {
  require(!w.samples.empty(), "cwt_spectrogram: empty waveform");
  const auto pf = cwt_pseudo_freqs(cfg.channels, cfg.band_lo, cfg.band_hi);
  // wavelet peak position in rad/sample at unit scale
  const double w_peak = mother == Mother::Amor
                            ? cfg.morlet_w0
                            : std::pow(cfg.morse_beta / cfg.morse_gamma,
                                       1.0 / cfg.morse_gamma);
  std::vector<double> scales(pf.size());
  for (size_t k = 0; k < pf.size(); ++k)
    scales[k] = w_peak * w.rate / (2.0 * M_PI * pf[k]);

  const double beta = cfg.morse_beta, gamma = cfg.morse_gamma, w0 = cfg.morlet_w0;
  // normalize Morse to unit peak
  const double morse_ln_peak = beta * std::log(w_peak) - std::pow(w_peak, gamma);
  auto kernel = [&](int ch, double f) {
    if (f <= 0.0) return 0.0;
    const double sw = scales[size_t(ch)] * 2.0 * M_PI * f / w.rate;  // rad/sample
    double v;
    if (mother == Mother::Amor) {
      const double d = sw - w0;
      v = std::exp(-0.5 * d * d);
    } else {
      v = std::exp(beta * std::log(sw) - std::pow(sw, gamma) - morse_ln_peak);
    }
    return v < 1e-8 ? 0.0 : v;
  };
  return detail::filterbank_spectrogram(w, cfg,
                                        mother == Mother::Amor ? SpecKind::WA
                                                               : SpecKind::WM,
                                        cfg.channels, kernel, /*energy=*/false);
}

// ---------------------------------------------------------------------------
// rescale + standardize
// ---------------------------------------------------------------------------

// Bilinear interpolation onto [F x T]; corners map to corners, so resizing to
// the same shape is the identity and constants stay constant.
inline Spectrogram rescale(const Spectrogram& s, int F, int T) {
  require(F >= 1 && T >= 1, "rescale: target dims must be >= 1");
  require(s.freq_bins >= 2 && s.time_frames >= 2,
          "rescale: source must be at least 2x2");
  Spectrogram out;
  out.kind = s.kind;
  out.freq_bins = F;
  out.time_frames = T;
  out.values.resize(size_t(F) * T);
  const double fr = F > 1 ? double(s.freq_bins - 1) / double(F - 1) : 0.0;
  const double tr = T > 1 ? double(s.time_frames - 1) / double(T - 1) : 0.0;
  for (int i = 0; i < F; ++i) {
    const double r = i * fr;
    const int r0 = int(r);
    const int r1 = std::min(r0 + 1, s.freq_bins - 1);
    const double ar = r - r0;
    for (int j = 0; j < T; ++j) {
      const double c = j * tr;
      const int c0 = int(c);
      const int c1 = std::min(c0 + 1, s.time_frames - 1);
      const double ac = c - c0;
      const double v = (1 - ar) * ((1 - ac) * s.at(r0, c0) + ac * s.at(r0, c1)) +
                       ar * ((1 - ac) * s.at(r1, c0) + ac * s.at(r1, c1));
      out.at(i, j) = float(v);
    }
  }
  return out;
}

// zero mean, unit variance over the whole grid; constant grids map to zero
inline void standardize(Spectrogram& s) {
  double mean = 0.0;
  for (float v : s.values) mean += v;
  mean /= double(s.values.size());
  double var = 0.0;
  for (float v : s.values) var += (v - mean) * (v - mean);
  var /= double(s.values.size());
  const double inv = 1.0 / std::max(std::sqrt(var), 1e-8);
  for (float& v : s.values) v = float((v - mean) * inv);
}

// ---------------------------------------------------------------------------
// full front end
// ---------------------------------------------------------------------------

struct FeatureTriple {
  Spectrogram ga, wa, wm;
  int label = -1;
  std::string id;
};

// resample -> duplicate-pad -> band-pass -> {GA, WA, WM} -> rescale
// (duplication runs before filtering by design; see FrontendConfig)
inline FeatureTriple extract_features(const Waveform& w, FeatureLevel level,
                                      const FrontendConfig& cfg = {}) {
  require(!w.samples.empty() && w.rate > 0, "extract_features: invalid waveform");
  Waveform x = resample(w, cfg.sample_rate);
  x = pad_duplicate(x, level == FeatureLevel::Event ? cfg.event_seconds
                                                    : cfg.recording_seconds);
  x = bandpass(x, cfg.band_lo, cfg.band_hi);
  const int T = level == FeatureLevel::Event ? cfg.event_frames : cfg.recording_frames;
  FeatureTriple out;
  out.ga = rescale(gammatone_spectrogram(x, cfg), cfg.out_freq, T);
  out.wa = rescale(cwt_spectrogram(x, Mother::Amor, cfg), cfg.out_freq, T);
  out.wm = rescale(cwt_spectrogram(x, Mother::Morse, cfg), cfg.out_freq, T);
  if (cfg.standardize) {
    standardize(out.ga);
    standardize(out.wa);
    standardize(out.wm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// feature cache (one RSPK1 file per FeatureTriple: GA, WA, WM records)
// ---------------------------------------------------------------------------

inline void save_features(const std::string& path, const FeatureTriple& ft) {
  auto rec = [&](const Spectrogram& s) {
    TensorRecord r;
    r.dims = {s.freq_bins, s.time_frames};
    r.data = s.values;
    r.kind = uint8_t(s.kind);
    r.label = ft.label;
    r.name = ft.id;
    return r;
  };
  write_records(path, {rec(ft.ga), rec(ft.wa), rec(ft.wm)});
}

inline FeatureTriple load_features(const std::string& path) {
  auto recs = read_records(path);
  require(recs.size() == 3, "feature cache: expected 3 records in " + path);
  FeatureTriple ft;
  for (auto& r : recs) {
    require(r.dims.size() == 2, "feature cache: bad record rank");
    Spectrogram s;
    s.freq_bins = r.dims[0];
    s.time_frames = r.dims[1];
    s.values = std::move(r.data);
    s.kind = SpecKind(r.kind);
    ft.label = r.label;
    ft.id = r.name;
    switch (s.kind) {
      case SpecKind::GA: ft.ga = std::move(s); break;
      case SpecKind::WA: ft.wa = std::move(s); break;
      case SpecKind::WM: ft.wm = std::move(s); break;
    }
  }
  return ft;
}

}  // namespace auscult
