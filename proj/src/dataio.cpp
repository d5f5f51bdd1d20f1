#include "vimp/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

namespace fs = std::filesystem;

namespace vimp::dataio {

std::string to_string(SoundType t) { return t == SoundType::drum ? "drum" : "imitation"; }

std::string to_string(DrumType t) {
  switch (t) {
    case DrumType::kick: return "kick";
    case DrumType::snare: return "snare";
    case DrumType::hh_closed: return "hh_closed";
    case DrumType::hh_open: return "hh_open";
  }
  return "?";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::evaluation: return "evaluation";
  }
  return "?";
}

SoundType parse_sound_type(const std::string& s) {
  if (s == "drum") return SoundType::drum;
  if (s == "imitation") return SoundType::imitation;
  throw ValidationError("unknown sound_type '" + s + "'");
}

DrumType parse_drum_type(const std::string& s) {
  if (s == "kick") return DrumType::kick;
  if (s == "snare") return DrumType::snare;
  if (s == "hh_closed") return DrumType::hh_closed;
  if (s == "hh_open") return DrumType::hh_open;
  throw ValidationError("unknown drum_type '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "evaluation") return Split::evaluation;
  throw ValidationError("unknown split '" + s + "'");
}

const SoundRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

void DatasetManifest::validate() const {
  std::unordered_map<std::string, const SoundRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) throw ValidationError("duplicate record id '" + r.id + "'");
  }
  for (const auto& r : records) {
    if (r.sound_type == SoundType::imitation && r.imitator_id.empty())
      throw ValidationError("record '" + r.id + "': imitation lacks imitator_id");
    if (!r.reference_id.empty()) {
      auto it = by_id.find(r.reference_id);
      if (it == by_id.end())
        throw ValidationError("record '" + r.id + "': dangling reference_id '" + r.reference_id + "'");
      if (it->second->sound_type != SoundType::drum)
        throw ValidationError("record '" + r.id + "': reference_id '" + r.reference_id + "' is not a drum");
      if (it->second->drum_type != r.drum_type)
        throw ValidationError("record '" + r.id + "': reference_id '" + r.reference_id +
                              "' has a different drum_type");
    }
    if (!split.count(r.id)) throw ValidationError("record '" + r.id + "' has no split assignment");
  }
  for (const auto& [id, s] : split) {
    (void)s;
    if (!by_id.count(id)) throw ValidationError("split entry '" + id + "' names no record");
  }
}

// --- WAV ---------------------------------------------------------------------

namespace {

struct ChunkHeader {
  char id[4];
  std::uint32_t size;
};

bool read_chunk_header(std::istream& is, ChunkHeader& h) {
  is.read(h.id, 4);
  if (is.gcount() != 4) return false;
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) return false;
  h.size = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);

  char riff[4], wave[4];
  is.read(riff, 4);
  std::uint32_t riff_size = 0;
  if (is.gcount() == 4) riff_size = read_u32(is);
  (void)riff_size;
  is.read(wave, 4);
  if (!is || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw FormatError(path + ": malformed WAV header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_fmt = false, have_data = false;

  ChunkHeader h;
  while (read_chunk_header(is, h)) {
    if (std::memcmp(h.id, "fmt ", 4) == 0) {
      if (h.size < 16) throw FormatError(path + ": malformed fmt chunk");
      format = read_u16(is);
      channels = read_u16(is);
      rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      bits = read_u16(is);
      if (h.size > 16) is.seekg(h.size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(h.id, "data", 4) == 0) {
      data.resize(h.size);
      is.read(reinterpret_cast<char*>(data.data()), h.size);
      if (is.gcount() != static_cast<std::streamsize>(h.size))
        throw FormatError(path + ": truncated data chunk");
      have_data = true;
    } else {
      is.seekg(h.size, std::ios::cur);
    }
    if (h.size & 1) is.seekg(1, std::ios::cur);  // RIFF chunks are word-aligned
    if (!is) break;
  }

  if (!have_fmt || !have_data) throw FormatError(path + ": missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw FormatError(path + ": malformed fmt chunk");
  if (format != 1 && format != 3)
    throw UnsupportedError(path + ": unsupported WAV encoding (format tag " + std::to_string(format) + ")");
  if (format == 1 && bits != 8 && bits != 16 && bits != 24 && bits != 32)
    throw UnsupportedError(path + ": unsupported PCM bit depth " + std::to_string(bits));
  if (format == 3 && bits != 32) throw UnsupportedError(path + ": unsupported float bit depth");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = frame_bytes ? data.size() / frame_bytes : 0;

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + i * frame_bytes + c * bytes_per_sample;
      double v = 0.0;
      if (format == 3) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (bits == 16) {
        std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        v = s / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s |= 0xff000000;
        v = s / 8388608.0;
      } else if (bits == 32) {
        std::int32_t s;
        std::memcpy(&s, p, 4);
        v = s / 2147483648.0;
      } else {  // 8-bit unsigned
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      }
      acc += v;
    }
    w.samples[i] = acc / channels;
  }
  for (double v : w.samples)
    if (!std::isfinite(v)) throw FormatError(path + ": non-finite sample");
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_size = n * 2;
  os.write("RIFF", 4);
  write_u32(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, 1);  // PCM
  write_u16(os, 1);  // mono
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  write_u32(os, data_size);
  for (double v : w.samples) {
    double c = std::clamp(v, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lrint(c * 32767.0));
    write_u16(os, static_cast<std::uint16_t>(s));
  }
  if (!os) throw IoError("short write to " + path);
}

Waveform resample(const Waveform& w, double target_rate) {
  if (target_rate <= 0) throw ValidationError("resample: target rate must be positive");
  if (w.samples.empty() || std::abs(target_rate - w.sample_rate) < 1e-9) {
    Waveform out = w;
    out.sample_rate = target_rate;
    return out;
  }
  const double ratio = target_rate / w.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // anti-alias when downsampling
  const int half = static_cast<int>(std::ceil(16.0 / cutoff));
  const std::size_t out_len = static_cast<std::size_t>(std::llround(w.samples.size() * ratio));

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const auto& x = w.samples;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  for (std::size_t i = 0; i < out_len; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const std::int64_t k0 = static_cast<std::int64_t>(std::floor(center)) - half + 1;
    const std::int64_t k1 = static_cast<std::int64_t>(std::floor(center)) + half;
    double acc = 0.0;
    for (std::int64_t k = std::max<std::int64_t>(0, k0); k <= std::min(n - 1, k1); ++k) {
      const double t = center - static_cast<double>(k);
      double s;
      if (std::abs(t) < 1e-12) {
        s = cutoff;
      } else {
        s = cutoff * std::sin(M_PI * cutoff * t) / (M_PI * cutoff * t);
      }
      const double win = 0.5 + 0.5 * std::cos(M_PI * t / (half + 1));  // Hann taper
      acc += x[static_cast<std::size_t>(k)] * s * win;
    }
    out.samples[i] = acc;
  }
  return out;
}

Waveform load_audio(const std::string& path) {
  Waveform w = read_wav(path);
  if (w.sample_rate != kCanonicalRate) w = resample(w, kCanonicalRate);
  return w;
}

// --- manifest / ratings CSV -----------------------------------------------------

namespace {
const std::vector<std::string> kManifestHeader = {"id",          "path",         "sound_type", "drum_type",
                                                  "imitator_id", "reference_id", "split"};
const std::vector<std::string> kRatingsHeader = {"listener_id", "trial_id", "imitation_id", "reference_id",
                                                 "rating"};

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& want,
                  const std::string& path) {
  if (got.size() != want.size()) throw ValidationError(path + ": bad header");
  for (std::size_t i = 0; i < want.size(); ++i)
    if (trim(got[i]) != want[i]) throw ValidationError(path + ": bad header, expected column '" + want[i] + "'");
}
}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty()) throw ValidationError(path + ": empty manifest");
  check_header(rows[0], kManifestHeader, path);
  const fs::path base = fs::path(path).parent_path();

  DatasetManifest m;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = path + " row " + std::to_string(i + 1);
    if (r.size() != kManifestHeader.size()) throw ValidationError(where + ": wrong column count");
    SoundRecord rec;
    rec.id = trim(r[0]);
    if (rec.id.empty()) throw ValidationError(where + ": empty id");
    fs::path p = trim(r[1]);
    rec.path = p.is_absolute() ? p.string() : (base / p).string();
    try {
      rec.sound_type = parse_sound_type(trim(r[2]));
      rec.drum_type = parse_drum_type(trim(r[3]));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    rec.imitator_id = trim(r[4]);
    rec.reference_id = trim(r[5]);
    try {
      m.split[rec.id] = parse_split(trim(r[6]));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    m.records.push_back(std::move(rec));
  }
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(kManifestHeader);
  for (const auto& r : m.records) {
    auto it = m.split.find(r.id);
    std::string sp = it == m.split.end() ? "evaluation" : to_string(it->second);
    rows.push_back({r.id, r.path, to_string(r.sound_type), to_string(r.drum_type), r.imitator_id,
                    r.reference_id, sp});
  }
  write_csv(path, rows);
}

RatingsTable load_ratings(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty()) throw ValidationError(path + ": empty ratings file");
  check_header(rows[0], kRatingsHeader, path);

  RatingsTable t;
  // (listener, trial) -> imitation; a trial rates one imitation against refs
  std::unordered_map<std::string, std::string> trial_imitation;
  std::unordered_set<std::string> seen_triplet;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = path + " row " + std::to_string(i + 1);
    if (r.size() != kRatingsHeader.size()) throw ValidationError(where + ": wrong column count");
    RatingRow row;
    row.listener_id = trim(r[0]);
    row.trial_id = trim(r[1]);
    row.imitation_id = trim(r[2]);
    row.reference_id = trim(r[3]);
    const std::string val = trim(r[4]);
    try {
      std::size_t pos = 0;
      row.rating = std::stod(val, &pos);
      if (pos != val.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(where + ": non-numeric rating '" + val + "'");
    }
    if (!std::isfinite(row.rating)) throw ValidationError(where + ": non-finite rating");
    const std::string lt = row.listener_id + "\x1f" + row.trial_id;
    auto [it, inserted] = trial_imitation.emplace(lt, row.imitation_id);
    if (!inserted && it->second != row.imitation_id)
      throw ValidationError(where + ": trial '" + row.trial_id + "' of listener '" + row.listener_id +
                            "' rates conflicting imitations");
    if (!seen_triplet.insert(lt + "\x1f" + row.reference_id).second)
      throw ValidationError(where + ": duplicate rating for the same trial and reference");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void save_ratings(const RatingsTable& t, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(kRatingsHeader);
  for (const auto& r : t.rows) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", r.rating);
    rows.push_back({r.listener_id, r.trial_id, r.imitation_id, r.reference_id, buf});
  }
  write_csv(path, rows);
}

// --- synthetic corpus --------------------------------------------------------------

namespace {

constexpr double kRate = kCanonicalRate;

struct DrumParams {
  DrumType type = DrumType::kick;
  double dur = 0.4;
  double f_start = 120, f_end = 50;  // kick sweep
  double tau_sweep = 0.05;
  double tau_amp = 0.12;   // kick / snare-tone / hat decay
  double tone_hz = 180;    // snare
  double tau_noise = 0.1;  // snare noise decay
  double mix = 0.5;        // snare tone/noise balance
};

DrumParams draw_params(DrumType type, Rng& rng) {
  DrumParams p;
  p.type = type;
  switch (type) {
    case DrumType::kick:
      p.dur = 0.35 + 0.15 * rng.uniform();
      p.f_start = 110 + 20 * rng.uniform();
      p.f_end = 45 + 10 * rng.uniform();
      p.tau_sweep = 0.03 + 0.05 * rng.uniform();
      p.tau_amp = 0.08 + 0.08 * rng.uniform();
      break;
    case DrumType::snare:
      p.dur = 0.25 + 0.15 * rng.uniform();
      p.tone_hz = 170 + 20 * rng.uniform();
      p.tau_amp = 0.05 + 0.05 * rng.uniform();
      p.tau_noise = 0.08 + 0.07 * rng.uniform();
      p.mix = 0.4 + 0.2 * rng.uniform();
      break;
    case DrumType::hh_closed:
      p.dur = 0.25;
      p.tau_amp = 0.015 + 0.025 * rng.uniform();  // decay well under 80 ms
      break;
    case DrumType::hh_open:
      p.dur = 0.75 + 0.15 * rng.uniform();
      p.tau_amp = 0.30 + 0.15 * rng.uniform();  // decay over 300 ms
      break;
  }
  return p;
}

void highpass2(std::vector<double>& x) {
  // two first-order differences: strong high-frequency emphasis
  for (int pass = 0; pass < 2; ++pass) {
    double prev = 0.0;
    for (double& v : x) {
      double cur = v;
      v = cur - prev;
      prev = cur;
    }
  }
}

void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m < 1e-12) return;
  const double g = peak / m;
  for (double& v : x) v *= g;
}

std::vector<double> render_drum(const DrumParams& p, std::uint64_t noise_seed, double detune_ratio) {
  const std::size_t n = static_cast<std::size_t>(std::llround(p.dur * kRate));
  std::vector<double> x(n, 0.0);
  Rng noise(noise_seed);
  switch (p.type) {
    case DrumType::kick: {
      const double f0 = p.f_start * detune_ratio;
      const double f1 = p.f_end * detune_ratio;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / kRate;
        const double phase = f1 * t + (f0 - f1) * p.tau_sweep * (1.0 - std::exp(-t / p.tau_sweep));
        x[i] = std::exp(-t / p.tau_amp) * std::sin(2.0 * M_PI * phase);
      }
      break;
    }
    case DrumType::snare: {
      const double f = p.tone_hz * detune_ratio;
      std::vector<double> nz(n);
      for (std::size_t i = 0; i < n; ++i) nz[i] = noise.normal();
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / kRate;
        const double tone = std::exp(-t / p.tau_amp) * std::sin(2.0 * M_PI * f * t);
        const double hiss = std::exp(-t / p.tau_noise) * nz[i] * 0.35;
        x[i] = p.mix * tone + (1.0 - p.mix) * hiss;
      }
      break;
    }
    case DrumType::hh_closed:
    case DrumType::hh_open: {
      std::vector<double> nz(n);
      for (std::size_t i = 0; i < n; ++i) nz[i] = noise.normal();
      highpass2(nz);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / kRate;
        x[i] = std::exp(-t / p.tau_amp) * nz[i];
      }
      break;
    }
  }
  peak_normalize(x, 0.9);
  return x;
}

struct ImitatorVoice {
  double formant_hz = 900;
  double q = 2.0;
  double wet = 0.65;
};

ImitatorVoice draw_voice(Rng& rng) {
  ImitatorVoice v;
  v.formant_hz = 400.0 * std::pow(2600.0 / 400.0, rng.uniform());  // log-uniform
  v.q = 1.0 + 3.0 * rng.uniform();
  v.wet = 0.5 + 0.3 * rng.uniform();
  return v;
}

void bandpass(std::vector<double>& x, double fc, double q, double wet) {
  // RBJ constant-peak band-pass blended with the dry signal
  const double w0 = 2.0 * M_PI * fc / kRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double in = v;
    const double out = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = in;
    y2 = y1;
    y1 = out;
    v = wet * out + (1.0 - wet) * in;
  }
}

std::vector<double> render_imitation(DrumParams p, const ImitatorVoice& voice, Rng& rng,
                                     std::uint64_t noise_seed) {
  const double detune = std::pow(2.0, rng.uniform(-1.0, 1.0) / 12.0);
  p.dur *= rng.uniform(0.92, 1.08);
  p.tau_amp *= rng.uniform(0.9, 1.1);
  auto x = render_drum(p, noise_seed, detune);
  bandpass(x, voice.formant_hz, voice.q, voice.wet);
  peak_normalize(x, 0.9);
  return x;
}

DrumType kClassOrder[4] = {DrumType::kick, DrumType::snare, DrumType::hh_closed, DrumType::hh_open};

}  // namespace

DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  if (spec.n_per_class < 1) throw ValidationError("synth_dataset: n_per_class must be >= 1");
  if (spec.imitators < 1) throw ValidationError("synth_dataset: imitators must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  std::array<int, 4> counts;
  if (spec.class_counts) counts = *spec.class_counts;
  else counts.fill(spec.n_per_class);

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"id", "path", "sound_type", "drum_type", "imitator_id", "reference_id", "split"});

  auto record_seed = [&](const std::string& id) { return splitmix64(spec.seed ^ hash_str(id)); };

  auto emit = [&](const std::string& id, const std::vector<double>& samples, SoundType st, DrumType dt,
                  const std::string& imitator, const std::string& ref, const std::string& split_name) {
    const std::string fname = id + ".wav";
    Waveform w;
    w.sample_rate = kRate;
    w.samples = samples;
    write_wav((fs::path(out_dir) / fname).string(), w);
    rows.push_back({id, fname, to_string(st), to_string(dt), imitator, ref, split_name});
  };

  // imitator voices, fixed per imitator id
  std::vector<ImitatorVoice> voices(spec.imitators);
  std::vector<std::string> imitator_ids(spec.imitators);
  for (int i = 0; i < spec.imitators; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "im%02d", i);
    imitator_ids[i] = buf;
    Rng r(record_seed("voice_" + imitator_ids[i]));
    voices[i] = draw_voice(r);
  }

  // evaluation references and their imitations
  std::vector<std::pair<std::string, DrumParams>> refs;
  for (int c = 0; c < 4; ++c) {
    const DrumType dt = kClassOrder[c];
    for (int k = 0; k < counts[c]; ++k) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "ref_%s_%02d", to_string(dt).c_str(), k);
      const std::string id = buf;
      Rng r(record_seed(id));
      DrumParams p = draw_params(dt, r);
      emit(id, render_drum(p, record_seed(id + "_noise"), 1.0), SoundType::drum, dt, "", "", "evaluation");
      refs.emplace_back(id, p);
    }
  }
  for (int i = 0; i < spec.imitators; ++i) {
    for (const auto& [ref_id, params] : refs) {
      const std::string id = "imi_" + imitator_ids[i] + "_" + ref_id;
      Rng r(record_seed(id));
      auto x = render_imitation(params, voices[i], r, record_seed(id + "_noise"));
      emit(id, x, SoundType::imitation, params.type, imitator_ids[i], ref_id, "evaluation");
    }
  }

  // unpaired train/validation material
  auto emit_pool = [&](const std::string& split_name, int drums_per_class, int imis_per_class) {
    for (int c = 0; c < 4; ++c) {
      const DrumType dt = kClassOrder[c];
      for (int k = 0; k < drums_per_class; ++k) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s_drum_%s_%02d", split_name.substr(0, 2).c_str(),
                      to_string(dt).c_str(), k);
        const std::string id = buf;
        Rng r(record_seed(id));
        DrumParams p = draw_params(dt, r);
        emit(id, render_drum(p, record_seed(id + "_noise"), 1.0), SoundType::drum, dt, "", "", split_name);
      }
      for (int k = 0; k < imis_per_class; ++k) {
        const std::string imitator = imitator_ids[k % spec.imitators];
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s_imi_%s_%02d", split_name.substr(0, 2).c_str(),
                      to_string(dt).c_str(), k);
        const std::string id = buf;
        Rng r(record_seed(id));
        DrumParams p = draw_params(dt, r);
        auto x = render_imitation(p, voices[k % spec.imitators], r, record_seed(id + "_noise"));
        emit(id, x, SoundType::imitation, dt, imitator, "", split_name);
      }
    }
  };
  emit_pool("train", spec.train_drums_per_class, spec.train_imitations_per_class);
  emit_pool("validation", spec.val_drums_per_class, spec.val_imitations_per_class);

  const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  write_csv(manifest_path, rows);
  return load_manifest(manifest_path);
}

}  // namespace vimp::dataio
