#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "vimp/dsp.hpp"
#include "vimp/fft.hpp"

using namespace vimp;
using namespace vimp::dsp;
using dataio::Waveform;

namespace {

Waveform sine(double freq, double dur_s, double amp = 0.8, double rate = 44100.0) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(dur_s * rate));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / rate);
  return w;
}

Waveform noise_burst(double dur_s, std::uint64_t seed = 5) {
  Waveform w;
  w.sample_rate = 44100.0;
  w.samples.resize(static_cast<std::size_t>(dur_s * 44100.0));
  Rng rng(seed);
  for (auto& v : w.samples) v = 0.5 * (2.0 * rng.uniform() - 1.0);
  return w;
}

// periodogram peak frequency, zero-padded for resolution
double dominant_freq(const Waveform& w) {
  std::size_t n = 1;
  while (n < w.samples.size()) n <<= 1;
  n = std::max<std::size_t>(n, 65536);
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < w.samples.size(); ++i) a[i] = w.samples[i];
  fft_inplace(a, false);
  std::size_t best = 1;
  for (std::size_t k = 1; k < n / 2; ++k)
    if (std::norm(a[k]) > std::norm(a[best])) best = k;
  return static_cast<double>(best) * w.sample_rate / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("bark scale evaluates the Zwicker formula") {
  CHECK(bark_scale(1000.0) == doctest::Approx(8.51).epsilon(0.002));
  // strictly increasing + numeric inverse
  double prev = bark_scale(20.0);
  for (double f = 100; f <= 22050; f += 500) {
    const double z = bark_scale(f);
    CHECK(z > prev);
    prev = z;
    CHECK(bark_to_hz(z) == doctest::Approx(f).epsilon(1e-6));
  }
}

TEST_CASE("terhardt curve value and maximum location") {
  CHECK(terhardt_db(1000.0) == doctest::Approx(-3.37).epsilon(0.005));
  // 1-D scan: maximum of the curve sits near 3.3-3.5 kHz
  double best_f = 0.0, best_v = -1e9;
  for (double f = 500; f <= 10000; f += 10) {
    const double v = terhardt_db(f);
    if (v > best_v) {
      best_v = v;
      best_f = f;
    }
  }
  CHECK(best_f > 3200.0);
  CHECK(best_f < 3600.0);
  CHECK(terhardt_db(3300.0) > terhardt_db(2500.0));
  CHECK(terhardt_db(3300.0) > terhardt_db(4500.0));
}

TEST_CASE("trim_silence removes leading and trailing silence only") {
  Waveform w;
  w.sample_rate = 44100;
  const std::size_t pad = 8820;  // 0.2 s
  const std::size_t burst = 4410;
  w.samples.assign(pad, 0.0);
  Rng rng(1);
  for (std::size_t i = 0; i < burst; ++i) w.samples.push_back(0.9 * (2.0 * rng.uniform() - 1.0));
  w.samples.insert(w.samples.end(), pad, 0.0);

  const Waveform t = trim_silence(w, -60.0);
  CHECK(t.samples.size() >= burst);
  CHECK(t.samples.size() <= burst + 2 * 662);  // within ~15 ms slack per side
  // energy preserved
  double e_in = 0.0, e_out = 0.0;
  for (double v : w.samples) e_in += v * v;
  for (double v : t.samples) e_out += v * v;
  CHECK(e_out == doctest::Approx(e_in).epsilon(1e-6));
}

TEST_CASE("trim_silence edge cases") {
  Waveform zeros;
  zeros.sample_rate = 44100;
  zeros.samples.assign(44100, 0.0);
  CHECK(trim_silence(zeros, -60.0).samples.empty());

  Waveform full;
  full.sample_rate = 44100;
  full.samples.assign(22050, 1.0);
  CHECK(trim_silence(full, -60.0).samples.size() == full.samples.size());

  CHECK_THROWS_AS(trim_silence(full, 0.0), ValidationError);
  CHECK_THROWS_AS(trim_silence(full, 3.0), ValidationError);
}

TEST_CASE("augment with identity ranges is a near-identity") {
  const Waveform w = sine(440.0, 0.5);
  AugmentConfig cfg;
  cfg.pitch_semitones = {0.0, 0.0};
  cfg.stretch_factor = {1.0, 1.0};
  const Waveform y = augment(w, cfg, 123);
  REQUIRE(y.samples.size() == w.samples.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    num += (y.samples[i] - w.samples[i]) * (y.samples[i] - w.samples[i]);
    den += w.samples[i] * w.samples[i];
  }
  CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("pitch shift of +12 semitones doubles the dominant frequency") {
  const Waveform w = sine(440.0, 1.0);
  AugmentConfig cfg;
  cfg.pitch_semitones = {12.0, 12.0};
  cfg.stretch_factor = {1.0, 1.0};
  const Waveform y = augment(w, cfg, 7);
  const double f = dominant_freq(y);
  CHECK(f == doctest::Approx(880.0).epsilon(0.02));
  // duration preserved within one hop
  CHECK(std::abs(static_cast<double>(y.samples.size()) - static_cast<double>(w.samples.size())) <=
        512.0);
}

TEST_CASE("stretch factor 2 halves the duration") {
  const Waveform w = sine(330.0, 1.0);
  AugmentConfig cfg;
  cfg.pitch_semitones = {0.0, 0.0};
  cfg.stretch_factor = {2.0, 2.0};
  const Waveform y = augment(w, cfg, 7);
  CHECK(std::abs(static_cast<double>(y.samples.size()) - 22050.0) <= 512.0);
  // pitch untouched
  CHECK(dominant_freq(y) == doctest::Approx(330.0).epsilon(0.02));
}

TEST_CASE("augment draws are deterministic per seed") {
  const Waveform w = sine(200.0, 0.3);
  AugmentConfig cfg;
  cfg.pitch_semitones = {-1.0, 1.0};
  cfg.stretch_factor = {0.7, 1.3};
  const Waveform a = augment(w, cfg, 42);
  const Waveform b = augment(w, cfg, 42);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("bark_spectrogram shape and band centers") {
  for (double dur : {0.01, 0.3, 2.5}) {
    const Spectrogram s = bark_spectrogram(noise_burst(dur));
    CHECK(s.values.size() == 128 * 128);
    REQUIRE(s.band_centers_hz.size() == 128);
    for (std::size_t b = 1; b < s.band_centers_hz.size(); ++b)
      CHECK(s.band_centers_hz[b] > s.band_centers_hz[b - 1]);
    for (float v : s.values) CHECK(std::isfinite(v));
  }
  Waveform wrong_rate = sine(440, 0.2, 0.5, 22050);
  CHECK_THROWS_AS(bark_spectrogram(wrong_rate), ValidationError);
}

TEST_CASE("bark_spectrogram shifts by one column per hop delay") {
  const Waveform w = noise_burst(1.2, 9);
  Waveform delayed;
  delayed.sample_rate = w.sample_rate;
  delayed.samples.assign(kHopSize, 0.0);
  delayed.samples.insert(delayed.samples.end(), w.samples.begin(), w.samples.end());

  const Spectrogram a = bark_spectrogram(w);
  const Spectrogram b = bark_spectrogram(delayed);
  const int frames_a = 1 + (static_cast<int>(w.samples.size()) - kWindowSize) / kHopSize;
  REQUIRE(frames_a < 127);
  for (int t = 0; t < frames_a; ++t)
    for (int band = 0; band < 128; ++band)
      CHECK(a.at(band, t) == doctest::Approx(b.at(band, t + 1)).epsilon(1e-9));
}

TEST_CASE("doubling the waveform raises unfloored cells by about 6 dB") {
  Waveform w = noise_burst(0.8, 21);
  Waveform loud = w;
  for (auto& v : loud.samples) v *= 2.0;
  const Spectrogram a = bark_spectrogram(w);
  const Spectrogram b = bark_spectrogram(loud);
  int checked = 0;
  for (int band = 0; band < 128; ++band) {
    const double floor_b = kDbFloor + terhardt_db(a.band_centers_hz[band]);
    for (int t = 0; t < 128; ++t) {
      if (a.at(band, t) > floor_b + 1.0 && b.at(band, t) > floor_b + 1.0) {
        CHECK(b.at(band, t) - a.at(band, t) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(0.002));
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("normalization maps corpus range to [0,1]") {
  Spectrogram a = bark_spectrogram(noise_burst(0.4, 2));
  Spectrogram b = bark_spectrogram(sine(440, 0.4));
  const NormStats st = compute_norm_stats({&a, &b});
  CHECK(st.lo < st.hi);
  normalize(a, st);
  normalize(b, st);
  float lo = 1.0f, hi = 0.0f;
  for (float v : a.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (float v : b.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == doctest::Approx(0.0f));
  CHECK(hi == doctest::Approx(1.0f));
}

TEST_CASE("spectrogram cache round-trips bit-exactly") {
  const auto tmp = std::filesystem::temp_directory_path() / "vimp_spec_cache.spec";
  const Spectrogram s = bark_spectrogram(noise_burst(0.5, 3));
  save_spectrogram(tmp.string(), s);
  const Spectrogram back = load_spectrogram(tmp.string());
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(s.values[i] == back.values[i]);
  CHECK(back.band_centers_hz == s.band_centers_hz);
  std::filesystem::remove(tmp);
}

}  // TEST_SUITE
