#pragma once

#include <array>
#include <string>
#include <vector>

#include "vimp/dataio.hpp"

namespace vimp::heurfeat {

using dataio::Waveform;

inline constexpr int kFeatureCount = 32;
inline constexpr int kMfccCount = 12;
inline constexpr int kMelBands = 40;

// Fixed layout: mfcc 1..12 means, their frame-delta means, duration, DerAM,
// loudness mean/std, pitch mean/std, spectral centroid mean/std.
const std::array<std::string, kFeatureCount>& feature_names();

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::string source_id;
};

// Orthonormal DCT-II matrix rows 0..n_out-1 over n_in points.
std::vector<std::vector<double>> dct_matrix(int n_out, int n_in);

// Per-frame MFCCs 1..12 (zeroth excluded): 40 HTK-Mel triangular filters on
// the power STFT, log with floor 1e-10, orthonormal DCT-II.
std::vector<std::array<double, kMfccCount>> mfcc(const Waveform& w);

// Per-frame YIN pitch track; unvoiced frames are <= 0. Frame 2048 / hop 512,
// search range 40-2000 Hz, absolute threshold 0.15, parabolic interpolation.
std::vector<double> yin_pitch(const Waveform& w);

// Moving-RMS amplitude envelope (window in seconds, evaluated every hop
// samples). Used for DerAM and by tests on the synthetic corpus.
std::vector<double> rms_envelope(const Waveform& w, double window_s = 0.010, int hop = 0);

FeatureVector heuristic_features(const Waveform& w, const std::string& source_id = "");

// --- feature / embedding CSV (source_id + named numeric columns) -----------------

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::vector<double>>> rows;  // (source_id, values)
};

void write_feature_csv(const std::string& path, const FeatureTable& t);
FeatureTable read_feature_csv(const std::string& path);

FeatureTable to_table(const std::vector<FeatureVector>& v);

}  // namespace vimp::heurfeat
