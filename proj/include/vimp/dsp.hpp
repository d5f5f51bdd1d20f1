#pragma once

#include <string>
#include <vector>

#include "vimp/common.hpp"
#include "vimp/dataio.hpp"

namespace vimp::dsp {

using dataio::Waveform;

// STFT grid shared by the spectrogram front-end and the heuristic features:
// 46.4 ms Hann window, 11.6 ms hop at 44100 Hz.
inline constexpr int kWindowSize = 2048;
inline constexpr int kHopSize = 512;

// 128 Bark bands x 128 frames time-frequency image. `values` holds dB after
// Terhardt weighting (or [0,1] once normalized), row-major band x frame.
struct Spectrogram {
  static constexpr int kBands = 128;
  static constexpr int kFrames = 128;

  std::vector<float> values;            // kBands * kFrames
  std::vector<double> band_centers_hz;  // kBands, strictly increasing

  Spectrogram() : values(kBands * kFrames, 0.0f) {}

  float& at(int band, int frame) { return values[static_cast<std::size_t>(band) * kFrames + frame]; }
  float at(int band, int frame) const { return values[static_cast<std::size_t>(band) * kFrames + frame]; }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  Interval pitch_semitones{0.0, 0.0};
  Interval stretch_factor{1.0, 1.0};
};

inline constexpr double kDbFloor = -100.0;

// --- scalar psychoacoustic curves ------------------------------------------------

// Zwicker's Bark scale z(f) = 13 atan(0.00076 f) + 3.5 atan((f/7500)^2).
double bark_scale(double hz);
// Numeric inverse of bark_scale (bisection; the curve is strictly increasing).
double bark_to_hz(double z);
// Terhardt threshold-in-quiet weight in dB,
// A(f) = -3.64 f^-0.8 + 6.5 exp(-0.6 (f-3.3)^2) - 1e-3 f^4 with f in kHz.
double terhardt_db(double hz);

// --- waveform transforms ------------------------------------------------------------

// Removes leading/trailing regions whose short-window RMS falls below
// peak + threshold_db. threshold_db must be negative. May return empty.
Waveform trim_silence(const Waveform& w, double threshold_db, double window_s = 0.010);

// Phase-vocoder time stretch; factor is a speed-up (output duration =
// input / factor). Pitch preserved.
Waveform time_stretch(const Waveform& w, double factor);

// Resample-then-stretch pitch shift; duration preserved.
Waveform pitch_shift(const Waveform& w, double semitones);

// One pitch shift and one time stretch with uniform draws from cfg, applied
// in an order decided by one coin flip from the seeded RNG.
Waveform augment(const Waveform& w, const AugmentConfig& cfg, std::uint64_t seed);

// --- spectrogram -----------------------------------------------------------------

// Power STFT frames (|X|^2 for bins 0..kWindowSize/2). Input shorter than one
// window is zero-padded to a single frame.
std::vector<std::vector<double>> power_stft(const Waveform& w);

// 128x128 Bark-band spectrogram in dB with Terhardt weighting added per band.
// Time axis is right-padded at the silence floor or center-cropped to 128
// frames. Input must be at the canonical 44100 Hz rate.
Spectrogram bark_spectrogram(const Waveform& w);

struct NormStats {
  float lo = 0.0f;
  float hi = 1.0f;
};

NormStats compute_norm_stats(const std::vector<const Spectrogram*>& specs);
// Min-max maps [lo, hi] -> [0, 1], clamped.
void normalize(Spectrogram& s, const NormStats& stats);

// --- cache file (magic VIMP) --------------------------------------------------------

void save_spectrogram(const std::string& path, const Spectrogram& s);
Spectrogram load_spectrogram(const std::string& path);

}  // namespace vimp::dsp
