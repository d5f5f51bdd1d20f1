#include "vimp/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "vimp/fft.hpp"

namespace vimp::dsp {

double bark_scale(double hz) {
  return 13.0 * std::atan(0.00076 * hz) + 3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

double bark_to_hz(double z) {
  double lo = 0.0, hi = 50000.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (bark_scale(mid) < z) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double terhardt_db(double hz) {
  const double f = hz / 1000.0;
  if (f <= 0.0) return kDbFloor;
  const double d = f - 3.3;
  return -3.64 * std::pow(f, -0.8) + 6.5 * std::exp(-0.6 * d * d) - 1e-3 * f * f * f * f;
}

// --- trim -------------------------------------------------------------------

Waveform trim_silence(const Waveform& w, double threshold_db, double window_s) {
  if (threshold_db >= 0.0) throw ValidationError("trim_silence: threshold_db must be negative");
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (w.samples.empty()) return out;

  const std::size_t n = w.samples.size();
  const std::size_t win = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(window_s * w.sample_rate)));
  const std::size_t hop = std::max<std::size_t>(1, win / 4);

  std::vector<double> rms;
  for (std::size_t s = 0; s < n; s += hop) {
    const std::size_t e = std::min(n, s + win);
    double acc = 0.0;
    for (std::size_t i = s; i < e; ++i) acc += w.samples[i] * w.samples[i];
    rms.push_back(std::sqrt(acc / static_cast<double>(e - s)));
  }
  const double peak = *std::max_element(rms.begin(), rms.end());
  if (peak <= 0.0) return out;  // all silent
  const double thresh = peak * std::pow(10.0, threshold_db / 20.0);

  std::size_t first = rms.size(), last = rms.size();
  for (std::size_t i = 0; i < rms.size(); ++i) {
    if (rms[i] >= thresh) {
      if (first == rms.size()) first = i;
      last = i;
    }
  }
  if (first == rms.size()) return out;
  const std::size_t begin = first * hop;
  const std::size_t end = std::min(n, last * hop + win);
  out.samples.assign(w.samples.begin() + begin, w.samples.begin() + end);
  return out;
}

// --- phase vocoder ------------------------------------------------------------

namespace {

inline double princarg(double x) { return x - 2.0 * M_PI * std::round(x / (2.0 * M_PI)); }

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

}  // namespace

Waveform time_stretch(const Waveform& w, double factor) {
  if (factor <= 0.0) throw ValidationError("time_stretch: factor must be positive");
  if (w.samples.empty() || std::abs(factor - 1.0) < 1e-9) return w;

  const int N = kWindowSize;
  const int Hs = N / 4;  // 75% synthesis overlap
  const int Ha = std::max(1, static_cast<int>(std::lround(Hs * factor)));
  const auto& x = w.samples;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t n_frames = 1 + (n - 1) / Ha;
  const std::int64_t out_cap = (n_frames - 1) * Hs + N;
  const std::int64_t target_len = std::llround(static_cast<double>(n) * Hs / Ha);

  static const std::vector<double> win = hann_window(kWindowSize);

  std::vector<double> out(out_cap, 0.0), norm(out_cap, 0.0);
  const int half = N / 2;
  std::vector<double> prev_phase(half + 1, 0.0), synth_phase(half + 1, 0.0);
  std::vector<std::complex<double>> spec(N);

  for (std::int64_t t = 0; t < n_frames; ++t) {
    const std::int64_t pos = t * Ha;
    for (int i = 0; i < N; ++i) {
      const std::int64_t j = pos + i;
      spec[i] = std::complex<double>(j < n ? x[j] * win[i] : 0.0, 0.0);
    }
    fft_inplace(spec, false);

    for (int k = 0; k <= half; ++k) {
      const double mag = std::abs(spec[k]);
      const double phase = std::arg(spec[k]);
      if (t == 0) {
        synth_phase[k] = phase;
      } else {
        const double omega = 2.0 * M_PI * k / N;
        const double delta = princarg(phase - prev_phase[k] - omega * Ha);
        const double true_freq = omega + delta / Ha;
        synth_phase[k] += true_freq * Hs;
      }
      prev_phase[k] = phase;
      spec[k] = std::polar(mag, synth_phase[k]);
    }
    for (int k = half + 1; k < N; ++k) spec[k] = std::conj(spec[N - k]);

    fft_inplace(spec, true);
    const std::int64_t opos = t * Hs;
    for (int i = 0; i < N; ++i) {
      out[opos + i] += spec[i].real() * win[i];
      norm[opos + i] += win[i] * win[i];
    }
  }

  Waveform y;
  y.sample_rate = w.sample_rate;
  y.samples.resize(static_cast<std::size_t>(std::min(target_len, out_cap)));
  for (std::size_t i = 0; i < y.samples.size(); ++i)
    y.samples[i] = norm[i] > 1e-8 ? out[i] / norm[i] : 0.0;
  return y;
}

Waveform pitch_shift(const Waveform& w, double semitones) {
  if (w.samples.empty() || std::abs(semitones) < 1e-9) return w;
  const double ratio = std::pow(2.0, semitones / 12.0);
  // stretch duration by `ratio`, then speed playback up by the same amount
  Waveform stretched = time_stretch(w, 1.0 / ratio);
  Waveform shifted = dataio::resample(stretched, w.sample_rate / ratio);
  shifted.sample_rate = w.sample_rate;
  return shifted;
}

Waveform augment(const Waveform& w, const AugmentConfig& cfg, std::uint64_t seed) {
  if (w.samples.empty()) throw ValidationError("augment: empty waveform");
  if (cfg.pitch_semitones.lo > cfg.pitch_semitones.hi || cfg.stretch_factor.lo > cfg.stretch_factor.hi)
    throw ValidationError("augment: empty interval");
  if (cfg.stretch_factor.lo <= 0.0) throw ValidationError("augment: stretch factors must be positive");

  Rng rng(seed);
  const double semis = rng.uniform(cfg.pitch_semitones.lo, cfg.pitch_semitones.hi);
  const double stretch = rng.uniform(cfg.stretch_factor.lo, cfg.stretch_factor.hi);
  if (rng.coin()) return time_stretch(pitch_shift(w, semis), stretch);
  return pitch_shift(time_stretch(w, stretch), semis);
}

// --- STFT / Bark front-end -------------------------------------------------------

std::vector<std::vector<double>> power_stft(const Waveform& w) {
  static const std::vector<double> win = hann_window(kWindowSize);
  static const double win_sum = [] {
    double s = 0.0;
    for (double v : hann_window(kWindowSize)) s += v;
    return s;
  }();
  const double power_scale = 1.0 / (win_sum * win_sum);

  std::vector<double> x = w.samples;
  if (x.size() < static_cast<std::size_t>(kWindowSize)) x.resize(kWindowSize, 0.0);
  const std::size_t n_frames = 1 + (x.size() - kWindowSize) / kHopSize;

  std::vector<std::vector<double>> frames(n_frames);
  std::vector<std::complex<double>> spec(kWindowSize);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t pos = t * kHopSize;
    for (int i = 0; i < kWindowSize; ++i)
      spec[i] = std::complex<double>(x[pos + i] * win[i], 0.0);
    fft_inplace(spec, false);
    auto& p = frames[t];
    p.resize(kWindowSize / 2 + 1);
    for (int k = 0; k <= kWindowSize / 2; ++k) p[k] = std::norm(spec[k]) * power_scale;
  }
  return frames;
}

namespace {

struct BarkBand {
  double center_hz = 0.0;
  double terhardt = 0.0;
  std::vector<std::pair<int, double>> weights;  // (fft bin, weight), weights sum to 1
};

const std::vector<BarkBand>& bark_filterbank() {
  static std::vector<BarkBand> bank;
  static std::once_flag once;
  std::call_once(once, [] {
    const double sr = dataio::kCanonicalRate;
    const int n_bins = kWindowSize / 2 + 1;
    const double z_lo = bark_scale(20.0);
    const double z_hi = bark_scale(sr / 2.0);
    const int n_points = Spectrogram::kBands + 2;
    std::vector<double> pts(n_points);
    for (int i = 0; i < n_points; ++i)
      pts[i] = z_lo + (z_hi - z_lo) * i / static_cast<double>(n_points - 1);

    bank.resize(Spectrogram::kBands);
    for (int b = 0; b < Spectrogram::kBands; ++b) {
      BarkBand& band = bank[b];
      const double left = pts[b], center = pts[b + 1], right = pts[b + 2];
      band.center_hz = bark_to_hz(center);
      band.terhardt = terhardt_db(band.center_hz);
      double sum = 0.0;
      for (int k = 0; k < n_bins; ++k) {
        const double f = k * sr / kWindowSize;
        const double z = bark_scale(f);
        double wgt = 0.0;
        if (z > left && z <= center) wgt = (z - left) / (center - left);
        else if (z > center && z < right) wgt = (right - z) / (right - center);
        if (wgt > 0.0) {
          band.weights.emplace_back(k, wgt);
          sum += wgt;
        }
      }
      if (sum > 0.0)
        for (auto& [k, wgt] : band.weights) wgt /= sum;
    }
  });
  return bank;
}

}  // namespace

Spectrogram bark_spectrogram(const Waveform& w) {
  if (std::abs(w.sample_rate - dataio::kCanonicalRate) > 1e-6)
    throw ValidationError("bark_spectrogram: expected 44100 Hz input, got " +
                          std::to_string(w.sample_rate));
  const auto& bank = bark_filterbank();
  const auto frames = power_stft(w);
  const int n_frames = static_cast<int>(frames.size());

  Spectrogram s;
  s.band_centers_hz.resize(Spectrogram::kBands);
  for (int b = 0; b < Spectrogram::kBands; ++b) s.band_centers_hz[b] = bank[b].center_hz;

  const int T = Spectrogram::kFrames;
  const int start = n_frames > T ? (n_frames - T) / 2 : 0;  // center crop
  for (int t = 0; t < T; ++t) {
    const int src = start + t;
    for (int b = 0; b < Spectrogram::kBands; ++b) {
      double db;
      if (src < n_frames) {
        double p = 0.0;
        for (const auto& [k, wgt] : bank[b].weights) p += wgt * frames[src][k];
        db = 10.0 * std::log10(std::max(p, 1e-10));
      } else {
        db = kDbFloor;  // right-pad at the silence floor
      }
      s.at(b, t) = static_cast<float>(db + bank[b].terhardt);
    }
  }
  return s;
}

NormStats compute_norm_stats(const std::vector<const Spectrogram*>& specs) {
  if (specs.empty()) throw ValidationError("compute_norm_stats: no spectrograms");
  NormStats st;
  st.lo = specs[0]->values[0];
  st.hi = specs[0]->values[0];
  for (const Spectrogram* s : specs) {
    for (float v : s->values) {
      st.lo = std::min(st.lo, v);
      st.hi = std::max(st.hi, v);
    }
  }
  return st;
}

void normalize(Spectrogram& s, const NormStats& stats) {
  const float span = stats.hi - stats.lo;
  for (float& v : s.values) {
    v = span > 1e-12f ? (v - stats.lo) / span : 0.0f;
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

void save_spectrogram(const std::string& path, const Spectrogram& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("VIMP", 4);
  write_u16(os, 1);
  write_u32(os, Spectrogram::kBands);
  write_u32(os, Spectrogram::kFrames);
  for (float v : s.values) write_f32(os, v);
  if (!os) throw IoError("short write to " + path);
}

Spectrogram load_spectrogram(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VIMP", 4) != 0) throw FormatError(path + ": bad spectrogram magic");
  const std::uint16_t version = read_u16(is);
  if (version != 1) throw FormatError(path + ": unsupported spectrogram version");
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t cols = read_u32(is);
  if (rows != Spectrogram::kBands || cols != Spectrogram::kFrames)
    throw FormatError(path + ": unexpected spectrogram shape");
  Spectrogram s;
  for (float& v : s.values) v = read_f32(is);
  const auto& bank = bark_filterbank();
  s.band_centers_hz.resize(Spectrogram::kBands);
  for (int b = 0; b < Spectrogram::kBands; ++b) s.band_centers_hz[b] = bank[b].center_hz;
  return s;
}

}  // namespace vimp::dsp
