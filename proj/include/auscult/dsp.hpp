#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>

#include "auscult/wav.hpp"

namespace auscult {

// ---------------------------------------------------------------------------
// resampling
// ---------------------------------------------------------------------------

// Band-limited resampling with a Hann-windowed sinc kernel. Same-rate input
// is passed through untouched.
inline Waveform resample(const Waveform& w, double target_rate) {
  require(target_rate > 0, "resample: target rate must be positive");
  require(!w.samples.empty() && w.rate > 0, "resample: invalid waveform");
  if (w.rate == target_rate) return w;

  const double ratio = target_rate / w.rate;         // output samples per input
  const double cutoff = std::min(1.0, ratio);        // fraction of input Nyquist
  const int half_width = int(std::ceil(32.0 / cutoff));
  const int64_t n_in = int64_t(w.samples.size());
  const int64_t n_out = iround64(double(n_in) * ratio);

  Waveform out;
  out.rate = target_rate;
  out.samples.resize(size_t(n_out));
  for (int64_t m = 0; m < n_out; ++m) {
    const double center = double(m) / ratio;  // position in input samples
    const int64_t k0 = int64_t(std::ceil(center)) - half_width;
    const int64_t k1 = int64_t(std::floor(center)) + half_width;
    double acc = 0.0;
    for (int64_t k = std::max<int64_t>(k0, 0); k <= std::min(k1, n_in - 1); ++k) {
      const double t = double(k) - center;
      const double st = cutoff * t;
      double sinc = st == 0.0 ? 1.0 : std::sin(M_PI * st) / (M_PI * st);
      const double win = 0.5 + 0.5 * std::cos(M_PI * t / double(half_width));
      acc += double(w.samples[size_t(k)]) * cutoff * sinc * win;
    }
    out.samples[size_t(m)] = float(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// duplicate padding
// ---------------------------------------------------------------------------

// Tiles the waveform end-to-end up to target_s seconds; longer input is
// truncated at the target.
inline Waveform pad_duplicate(const Waveform& w, double target_s) {
  require(!w.samples.empty(), "pad_duplicate: empty waveform");
  const int64_t target = iround64(target_s * w.rate);
  Waveform out;
  out.rate = w.rate;
  out.samples.resize(size_t(target));
  const int64_t n = int64_t(w.samples.size());
  for (int64_t i = 0; i < target; ++i) out.samples[size_t(i)] = w.samples[size_t(i % n)];
  return out;
}

// ---------------------------------------------------------------------------
// Butterworth band-pass + zero-phase filtering
// ---------------------------------------------------------------------------

struct Biquad {
  double b0, b1, b2, a1, a2;
};

namespace detail {

// Butterworth band-pass as a biquad cascade via the bilinear transform.
// `order` is the low-pass prototype order; the band-pass has 2*order poles.
inline std::vector<Biquad> butter_bandpass(int order, double lo_hz, double hi_hz,
                                           double fs) {
  using cd = std::complex<double>;
  const double w1 = std::tan(M_PI * lo_hz / fs);  // prewarped edges
  const double w2 = std::tan(M_PI * hi_hz / fs);
  const double bw = w2 - w1, w0sq = w1 * w2;

  // analog prototype poles on the unit circle, left half-plane
  std::vector<cd> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = M_PI * double(2 * k + order + 1) / double(2 * order);
    const cd p(std::cos(theta), std::sin(theta));
    // low-pass -> band-pass: s^2 - p*bw*s + w0^2 = 0
    const cd disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
    poles.push_back((p * bw + disc) * 0.5);
    poles.push_back((p * bw - disc) * 0.5);
  }
  // bilinear transform; band-pass zeros land at z = +1 (order) and z = -1 (order)
  std::vector<cd> zpoles;
  for (const cd& s : poles) zpoles.push_back((1.0 + s) / (1.0 - s));

  // pair each pole with its conjugate into biquads with numerator (z^2 - 1)
  std::vector<Biquad> sos;
  std::vector<bool> used(zpoles.size(), false);
  for (size_t i = 0; i < zpoles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    size_t match = i;
    double best = 1e300;
    for (size_t j = i + 1; j < zpoles.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(zpoles[j] - std::conj(zpoles[i]));
      if (d < best) {
        best = d;
        match = j;
      }
    }
    used[match] = true;
    const cd p1 = zpoles[i], p2 = zpoles[match];
    sos.push_back({1.0, 0.0, -1.0, -(p1 + p2).real(), (p1 * p2).real()});
  }

  // unit gain at the geometric band center
  const double wc = 2.0 * std::atan(std::sqrt(w0sq));
  const cd z = std::polar(1.0, wc);
  cd h(1.0, 0.0);
  for (const auto& s : sos)
    h *= (s.b0 * z * z + s.b1 * z + s.b2) / (z * z + s.a1 * z + s.a2);
  const double g = 1.0 / std::abs(h);
  if (!sos.empty()) {
    sos[0].b0 *= g;
    sos[0].b1 *= g;
    sos[0].b2 *= g;
  }
  return sos;
}

// steady-state filter state for a unit-step input (per section, DF2T)
inline void sos_zi(const std::vector<Biquad>& sos, std::vector<double>& zi) {
  zi.assign(sos.size() * 2, 0.0);
  double carry = 1.0;  // cumulative DC gain of earlier sections
  for (size_t s = 0; s < sos.size(); ++s) {
    const auto& q = sos[s];
    const double dc = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double y = carry * dc;
    const double s1 = q.b2 * carry - q.a2 * y;
    const double s0 = q.b1 * carry - q.a1 * y + s1;
    zi[2 * s] = s0;
    zi[2 * s + 1] = s1;
    carry = y;
  }
}

inline void sosfilt(const std::vector<Biquad>& sos, std::vector<double>& x,
                    std::vector<double> state) {
  for (size_t s = 0; s < sos.size(); ++s) {
    const auto& q = sos[s];
    double s0 = state[2 * s], s1 = state[2 * s + 1];
    for (double& v : x) {
      const double y = q.b0 * v + s0;
      s0 = q.b1 * v - q.a1 * y + s1;
      s1 = q.b2 * v - q.a2 * y;
      v = y;
    }
  }
}

}  // namespace detail

// Zero-phase (forward-backward) 4th-order Butterworth band-pass. Design edges
// are widened so the pass-band stays within 1 dB on [1.25*lo, 0.8*hi] after
// the two passes; the upper edge is clamped just below Nyquist, which the
// bilinear warp maps far beyond the band of interest.
inline Waveform bandpass(const Waveform& w, double lo_hz, double hi_hz) {
  const double nyq = w.rate / 2.0;
  require(lo_hz > 0 && lo_hz < hi_hz && hi_hz <= nyq,
          "bandpass: requires 0 < lo < hi <= rate/2");
  const double lo_d = lo_hz * 0.90;
  const double hi_d = std::min(hi_hz * 1.08, 0.998 * nyq);
  const auto sos = detail::butter_bandpass(4, lo_d, hi_d, w.rate);

  const int64_t n = int64_t(w.samples.size());
  const int64_t padlen = std::min<int64_t>(n - 1, 512);
  std::vector<double> ext(size_t(n + 2 * padlen));
  // odd reflection about the end points suppresses edge transients
  for (int64_t i = 0; i < padlen; ++i)
    ext[size_t(i)] = 2.0 * w.samples[0] - w.samples[size_t(padlen - i)];
  for (int64_t i = 0; i < n; ++i) ext[size_t(padlen + i)] = w.samples[size_t(i)];
  for (int64_t i = 0; i < padlen; ++i)
    ext[size_t(padlen + n + i)] =
        2.0 * w.samples[size_t(n - 1)] - w.samples[size_t(n - 2 - i)];

  std::vector<double> zi;
  detail::sos_zi(sos, zi);
  auto scaled = [&](double x0) {
    std::vector<double> st(zi.size());
    for (size_t i = 0; i < zi.size(); ++i) st[i] = zi[i] * x0;
    return st;
  };
  detail::sosfilt(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());

  Waveform out;
  out.rate = w.rate;
  out.samples.resize(size_t(n));
  for (int64_t i = 0; i < n; ++i) out.samples[size_t(i)] = float(ext[size_t(padlen + i)]);
  return out;
}

// ---------------------------------------------------------------------------
// FFT (FFTW, single precision, cached deterministic plans)
// ---------------------------------------------------------------------------

class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  // in-place complex transforms on interleaved buffers of length n
  void forward(std::complex<float>* buf, int n) { run(buf, n, FFTW_FORWARD); }
  void inverse(std::complex<float>* buf, int n) {
    run(buf, n, FFTW_BACKWARD);
    const float inv = 1.0f / float(n);
    for (int i = 0; i < n; ++i) buf[i] *= inv;
  }

  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;

 private:
  FftEngine() = default;
  ~FftEngine() {
    for (auto& [key, plan] : plans_) fftwf_destroy_plan(plan);
  }

  void run(std::complex<float>* buf, int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it == plans_.end()) {
      // planned once per size on an internal scratch buffer, executed via
      // new-array interface; ESTIMATE keeps planning deterministic
      std::vector<std::complex<float>> scratch(size_t(n), std::complex<float>(0.0f));
      // UNALIGNED keeps new-array execution valid for arbitrary caller buffers
      fftwf_plan p = fftwf_plan_dft_1d(
          n, reinterpret_cast<fftwf_complex*>(scratch.data()),
          reinterpret_cast<fftwf_complex*>(scratch.data()), sign,
          FFTW_ESTIMATE | FFTW_UNALIGNED);
      it = plans_.emplace(key, p).first;
    }
    fftwf_execute_dft(it->second, reinterpret_cast<fftwf_complex*>(buf),
                      reinterpret_cast<fftwf_complex*>(buf));
  }

  std::mutex mu_;
  std::map<std::pair<int, int>, fftwf_plan> plans_;
};

inline int next_pow2(int64_t n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace auscult
