#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "vimp/dataio.hpp"
#include "vimp/heurfeat.hpp"

using namespace vimp;
using namespace vimp::heurfeat;
using dataio::Waveform;

namespace {

Waveform sine(double freq, double dur_s, double amp = 0.8) {
  Waveform w;
  w.sample_rate = 44100.0;
  w.samples.resize(static_cast<std::size_t>(dur_s * 44100.0));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / 44100.0);
  return w;
}

Waveform white_noise(double dur_s, std::uint64_t seed) {
  Waveform w;
  w.sample_rate = 44100.0;
  w.samples.resize(static_cast<std::size_t>(dur_s * 44100.0));
  Rng rng(seed);
  for (auto& v : w.samples) v = 0.4 * rng.normal();
  return w;
}

}  // namespace

TEST_SUITE("heurfeat") {

TEST_CASE("dct basis is orthonormal") {
  const int n = 40;
  const auto m = dct_matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += m[i][k] * m[j][k];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("flat spectrum yields near-zero mfcc 1..12") {
  // a single impulse has a flat power spectrum in its frame
  Waveform w;
  w.sample_rate = 44100.0;
  w.samples.assign(2048, 0.0);
  w.samples[1024] = 1.0;
  const auto coeffs = mfcc(w);
  REQUIRE(coeffs.size() == 1);
  for (int c = 0; c < kMfccCount; ++c) CHECK(std::abs(coeffs[0][c]) < 1e-6);
}

TEST_CASE("mfcc variance decreases with coefficient index on white noise") {
  const Waveform w = white_noise(1000.0 * 512.0 / 44100.0 + 0.05, 17);
  const auto coeffs = mfcc(w);
  REQUIRE(coeffs.size() >= 1000);
  std::array<double, kMfccCount> mean{}, var{};
  for (const auto& fr : coeffs)
    for (int c = 0; c < kMfccCount; ++c) mean[c] += fr[c];
  for (auto& m : mean) m /= static_cast<double>(coeffs.size());
  for (const auto& fr : coeffs)
    for (int c = 0; c < kMfccCount; ++c) var[c] += (fr[c] - mean[c]) * (fr[c] - mean[c]);
  const double low = (var[0] + var[1] + var[2] + var[3]) / 4.0;
  const double high = (var[8] + var[9] + var[10] + var[11]) / 4.0;
  CHECK(low > high);
}

TEST_CASE("yin tracks a 440 Hz sine") {
  const auto track = yin_pitch(sine(440.0, 1.0));
  REQUIRE(!track.empty());
  int voiced = 0;
  for (double f : track) {
    if (f > 0.0) {
      ++voiced;
      CHECK(f == doctest::Approx(440.0).epsilon(0.01));
    }
  }
  CHECK(voiced >= static_cast<int>(track.size() * 9) / 10);
}

TEST_CASE("yin leaves white noise mostly unvoiced") {
  const auto track = yin_pitch(white_noise(1.0, 23));
  int unvoiced = 0;
  for (double f : track)
    if (f <= 0.0) ++unvoiced;
  CHECK(unvoiced * 2 > static_cast<int>(track.size()));
}

TEST_CASE("yin finds the fundamental of a square wave without octave errors") {
  Waveform w;
  w.sample_rate = 44100.0;
  w.samples.resize(44100);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double phase = std::fmod(100.0 * i / 44100.0, 1.0);
    w.samples[i] = phase < 0.5 ? 0.7 : -0.7;
  }
  const auto track = yin_pitch(w);
  std::vector<double> voiced;
  for (double f : track)
    if (f > 0.0) voiced.push_back(f);
  REQUIRE(!voiced.empty());
  std::sort(voiced.begin(), voiced.end());
  const double median = voiced[voiced.size() / 2];
  CHECK(median == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("heuristic features have the fixed 32-name layout") {
  const auto& names = feature_names();
  CHECK(names.size() == 32);
  CHECK(names[0] == "mfcc01_m");
  CHECK(names[12] == "mfcc01_d");
  CHECK(names[24] == "duration");
  CHECK(names[25] == "deram");
  CHECK(names[31] == "scent_s");
  // unique
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j) CHECK(names[i] != names[j]);
}

TEST_CASE("duration feature is exact and all features finite") {
  const auto fv = heuristic_features(sine(440.0, 1.0), "x");
  CHECK(fv.values[24] == doctest::Approx(1.0).epsilon(1e-9));
  for (double v : fv.values) CHECK(std::isfinite(v));
}

TEST_CASE("deram is negative for decaying sounds and closer to zero for slow decay") {
  // closed vs open hi-hat shapes: a short decay within a short sound vs a
  // long decay within a long one
  auto decaying = [&](double tau, double dur) {
    Waveform w = white_noise(dur, 31);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      w.samples[i] *= std::exp(-static_cast<double>(i) / 44100.0 / tau);
    return w;
  };
  const auto fast = heuristic_features(decaying(0.02, 0.25));
  const auto slow = heuristic_features(decaying(0.40, 0.80));
  CHECK(fast.values[25] < 0.0);
  CHECK(slow.values[25] < 0.0);
  CHECK(slow.values[25] > fast.values[25]);  // slow decay is closer to zero
}

TEST_CASE("time reversal moves deram from decay-heavy to attack-heavy regime") {
  Waveform w = white_noise(0.5, 37);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] *= std::exp(-static_cast<double>(i) / 44100.0 / 0.06);
  Waveform rev = w;
  std::reverse(rev.samples.begin(), rev.samples.end());
  const double d_decay = heuristic_features(w).values[25];
  const double d_attack = heuristic_features(rev).values[25];
  CHECK(d_decay < -0.5);
  CHECK(d_attack > d_decay);
  CHECK(std::abs(d_attack) < std::abs(d_decay));
}

TEST_CASE("scaling invariance and loudness shift") {
  const Waveform w = sine(523.25, 0.7, 0.25);
  Waveform loud = w;
  for (auto& v : loud.samples) v *= 3.0;
  const auto a = heuristic_features(w);
  const auto b = heuristic_features(loud);
  const double shift = 20.0 * std::log10(3.0);
  CHECK(b.values[26] - a.values[26] == doctest::Approx(shift).epsilon(1e-6));  // loud_m
  for (int idx : {24, 28, 29, 30}) {                                           // duration, pitch, scent
    const double denom = std::max(1.0, std::abs(a.values[idx]));
    CHECK(std::abs(b.values[idx] - a.values[idx]) / denom < 1e-6);
  }
}

TEST_CASE("delta features of a hop-periodic signal are zero") {
  // period divides the hop exactly, so every analysis frame is identical
  const double f = 44100.0 * 5.0 / 512.0;
  const auto fv = heuristic_features(sine(f, 0.5));
  for (int c = 0; c < kMfccCount; ++c) CHECK(std::abs(fv.values[kMfccCount + c]) < 1e-9);
}

TEST_CASE("unvoiced-only sounds yield zero pitch features") {
  Waveform w = white_noise(0.4, 41);
  const auto fv = heuristic_features(w);
  // hi-hat-like noise: pitch features must not blow up
  CHECK(std::isfinite(fv.values[28]));
  CHECK(std::isfinite(fv.values[29]));
}

TEST_CASE("feature csv round trip") {
  const auto tmp = std::filesystem::temp_directory_path() / "vimp_feats.csv";
  std::vector<FeatureVector> fvs;
  fvs.push_back(heuristic_features(sine(440.0, 0.3), "a"));
  fvs.push_back(heuristic_features(white_noise(0.3, 3), "b"));
  write_feature_csv(tmp.string(), to_table(fvs));
  const auto t = read_feature_csv(tmp.string());
  REQUIRE(t.rows.size() == 2);
  CHECK(t.names.size() == 32);
  CHECK(t.rows[0].first == "a");
  for (int i = 0; i < 32; ++i)
    CHECK(t.rows[0].second[i] == doctest::Approx(fvs[0].values[i]).epsilon(1e-9));
  std::filesystem::remove(tmp);
}

}  // TEST_SUITE
