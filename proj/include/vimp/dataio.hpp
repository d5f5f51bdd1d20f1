#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vimp/common.hpp"

namespace vimp::dataio {

enum class SoundType { drum, imitation };
enum class DrumType { kick, snare, hh_closed, hh_open };
enum class Split { train, validation, evaluation };

std::string to_string(SoundType t);
std::string to_string(DrumType t);
std::string to_string(Split s);
SoundType parse_sound_type(const std::string& s);
DrumType parse_drum_type(const std::string& s);
Split parse_split(const std::string& s);

struct SoundRecord {
  std::string id;
  std::string path;
  SoundType sound_type = SoundType::drum;
  DrumType drum_type = DrumType::kick;
  std::string imitator_id;   // required for imitations
  std::string reference_id;  // optional; drum this imitation targets
};

struct DatasetManifest {
  std::vector<SoundRecord> records;
  std::unordered_map<std::string, Split> split;

  const SoundRecord* find(const std::string& id) const;
  // Checks all invariants; throws ValidationError naming the offending record.
  void validate() const;
};

// Mono audio. Samples are nominally in [-1, 1]; synthesis and augmentation
// keep them there, file writers clamp.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 44100.0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline constexpr double kCanonicalRate = 44100.0;

struct RatingRow {
  std::string listener_id;
  std::string trial_id;
  std::string imitation_id;
  std::string reference_id;
  double rating = 0.0;
};

struct RatingsTable {
  std::vector<RatingRow> rows;
};

// --- WAV --------------------------------------------------------------------

// RIFF PCM reader: 8/16/24/32-bit integer or 32-bit float, any channel count.
// Channels are averaged to mono, integer samples scaled to [-1, 1], sample
// rate preserved.
Waveform read_wav(const std::string& path);

// 16-bit PCM mono writer (samples clamped to [-1, 1]).
void write_wav(const std::string& path, const Waveform& w);

// Windowed-sinc resampler.
Waveform resample(const Waveform& w, double target_rate);

// read_wav + resample to the canonical 44100 Hz rate.
Waveform load_audio(const std::string& path);

// --- manifests & ratings ------------------------------------------------------

// CSV with header id,path,sound_type,drum_type,imitator_id,reference_id,split.
// Relative paths are resolved against the manifest's directory.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// CSV with header listener_id,trial_id,imitation_id,reference_id,rating.
RatingsTable load_ratings(const std::string& path);
void save_ratings(const RatingsTable& t, const std::string& path);

// --- synthetic corpus -----------------------------------------------------------

struct SynthSpec {
  // Reference drums per class in the evaluation split. When class_counts is
  // set it overrides n_per_class (order: kick, snare, hh_closed, hh_open).
  int n_per_class = 6;
  std::optional<std::array<int, 4>> class_counts;
  int imitators = 14;
  std::uint64_t seed = 1;
  // Extra unpaired material for the train/validation splits.
  int train_drums_per_class = 3;
  int train_imitations_per_class = 6;
  int val_drums_per_class = 1;
  int val_imitations_per_class = 2;
};

// Writes deterministic WAVs plus manifest.csv under out_dir and returns the
// manifest. Every evaluation imitation carries its reference drum's id.
DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace vimp::dataio
