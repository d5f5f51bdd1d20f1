#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vimp/dataio.hpp"
#include "vimp/heurfeat.hpp"

using namespace vimp;
using namespace vimp::dataio;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// hand-rolled WAV writer so read_wav is checked against independent bytes
void put_u16(std::ofstream& os, std::uint16_t v) { write_u16(os, v); }
void put_u32(std::ofstream& os, std::uint32_t v) { write_u32(os, v); }

void write_pcm16(const std::string& path, const std::vector<std::int16_t>& samples, int channels,
                 int rate) {
  std::ofstream os(path, std::ios::binary);
  const std::uint32_t data = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);
  put_u16(os, static_cast<std::uint16_t>(channels));
  put_u32(os, static_cast<std::uint32_t>(rate));
  put_u32(os, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(os, static_cast<std::uint16_t>(channels * 2));
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data);
  for (auto s : samples) put_u16(os, static_cast<std::uint16_t>(s));
}

void write_float32(const std::string& path, const std::vector<float>& samples, int channels, int rate) {
  std::ofstream os(path, std::ios::binary);
  const std::uint32_t data = static_cast<std::uint32_t>(samples.size() * 4);
  os.write("RIFF", 4);
  put_u32(os, 36 + data);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 3);
  put_u16(os, static_cast<std::uint16_t>(channels));
  put_u32(os, static_cast<std::uint32_t>(rate));
  put_u32(os, static_cast<std::uint32_t>(rate * channels * 4));
  put_u16(os, static_cast<std::uint16_t>(channels * 4));
  put_u16(os, 32);
  os.write("data", 4);
  put_u32(os, data);
  for (float s : samples) write_f32(os, s);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("read_wav scales 16-bit samples linearly") {
  const auto dir = tmpdir("vimp_wav");
  const auto p = (dir / "mono.wav").string();
  write_pcm16(p, {0, 16384, -16384}, 1, 44100);
  const Waveform w = read_wav(p);
  REQUIRE(w.samples.size() == 3);
  CHECK(w.sample_rate == 44100.0);
  CHECK(w.samples[0] == doctest::Approx(0.0));
  CHECK(w.samples[1] == doctest::Approx(0.5));
  CHECK(w.samples[2] == doctest::Approx(-0.5));
}

TEST_CASE("read_wav averages channels to mono") {
  const auto dir = tmpdir("vimp_wav_st");
  const auto p = (dir / "stereo.wav").string();
  write_float32(p, {1.0f, 0.0f, 1.0f, 0.0f}, 2, 48000);
  const Waveform w = read_wav(p);
  REQUIRE(w.samples.size() == 2);
  CHECK(w.samples[0] == doctest::Approx(0.5));
  CHECK(w.samples[1] == doctest::Approx(0.5));
  CHECK(w.sample_rate == 48000.0);
}

TEST_CASE("wav write/read round trip keeps one second of samples") {
  const auto dir = tmpdir("vimp_wav_rt");
  Waveform w;
  w.sample_rate = 44100;
  w.samples.resize(44100);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * M_PI * 220.0 * i / 44100.0);
  const auto p = (dir / "sine.wav").string();
  write_wav(p, w);
  const Waveform back = read_wav(p);
  CHECK(back.samples.size() == 44100);
  double err = 0.0;
  for (std::size_t i = 0; i < back.samples.size(); ++i)
    err = std::max(err, std::abs(back.samples[i] - w.samples[i]));
  CHECK(err < 1.0 / 32000.0);  // 16-bit quantization
}

TEST_CASE("read_wav rejects malformed and unsupported files") {
  const auto dir = tmpdir("vimp_wav_bad");
  {
    std::ofstream os(dir / "garbage.wav", std::ios::binary);
    os << "this is not a wav file at all";
  }
  CHECK_THROWS_AS(read_wav((dir / "garbage.wav").string()), FormatError);

  // format tag 85 (MP3) is unsupported
  const auto p = (dir / "mp3ish.wav").string();
  {
    std::ofstream os(p, std::ios::binary);
    os.write("RIFF", 4);
    put_u32(os, 36);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 85);
    put_u16(os, 1);
    put_u32(os, 44100);
    put_u32(os, 44100);
    put_u16(os, 1);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, 0);
  }
  CHECK_THROWS_AS(read_wav(p), UnsupportedError);
}

TEST_CASE("resample tracks a sine and changes length") {
  Waveform w;
  w.sample_rate = 44100;
  w.samples.resize(22050);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::sin(2.0 * M_PI * 440.0 * i / 44100.0);
  const Waveform up = resample(w, 48000);
  CHECK(up.sample_rate == 48000.0);
  CHECK(std::abs(static_cast<double>(up.samples.size()) - 22050.0 * 48000 / 44100) <= 1.0);
  // mid-signal values should still follow the 440 Hz sine
  double err = 0.0;
  for (std::size_t i = 1000; i < up.samples.size() - 1000; ++i) {
    const double t = static_cast<double>(i) / 48000.0;
    err = std::max(err, std::abs(up.samples[i] - std::sin(2.0 * M_PI * 440.0 * t)));
  }
  CHECK(err < 0.01);
}

TEST_CASE("manifest loads, validates and round-trips") {
  const auto dir = tmpdir("vimp_manifest");
  {
    std::ofstream os(dir / "manifest.csv");
    os << "id,path,sound_type,drum_type,imitator_id,reference_id,split\n";
    os << "d1,d1.wav,drum,kick,,,evaluation\n";
    os << "i1,i1.wav,imitation,kick,imA,d1,evaluation\n";
  }
  const auto m = load_manifest((dir / "manifest.csv").string());
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].id == "d1");
  CHECK(m.records[1].imitator_id == "imA");
  CHECK(m.records[1].reference_id == "d1");
  // relative paths resolve against the manifest directory
  CHECK(m.records[0].path == (dir / "d1.wav").string());
  CHECK(m.split.at("i1") == Split::evaluation);

  const auto copy = (dir / "copy.csv").string();
  save_manifest(m, copy);
  const auto m2 = load_manifest(copy);
  REQUIRE(m2.records.size() == m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(m2.records[i].id == m.records[i].id);
    CHECK(m2.records[i].path == m.records[i].path);
    CHECK(m2.records[i].sound_type == m.records[i].sound_type);
    CHECK(m2.records[i].drum_type == m.records[i].drum_type);
    CHECK(m2.records[i].imitator_id == m.records[i].imitator_id);
    CHECK(m2.records[i].reference_id == m.records[i].reference_id);
  }
  CHECK(m2.split == m.split);
}

TEST_CASE("manifest rejects bad rows with row numbers") {
  const auto dir = tmpdir("vimp_manifest_bad");
  auto write_and_try = [&](const std::string& body) {
    const auto p = (dir / "m.csv").string();
    std::ofstream os(p);
    os << "id,path,sound_type,drum_type,imitator_id,reference_id,split\n" << body;
    os.close();
    return p;
  };

  SUBCASE("tom class was removed from the taxonomy") {
    const auto p = write_and_try("d1,d1.wav,drum,tom,,,train\n");
    CHECK_THROWS_WITH_AS(load_manifest(p), doctest::Contains("row 2"), ValidationError);
  }
  SUBCASE("imitation requires imitator_id") {
    const auto p = write_and_try("i1,i1.wav,imitation,kick,,,train\n");
    CHECK_THROWS_AS(load_manifest(p), ValidationError);
  }
  SUBCASE("duplicate ids") {
    const auto p = write_and_try("d1,a.wav,drum,kick,,,train\nd1,b.wav,drum,kick,,,train\n");
    CHECK_THROWS_AS(load_manifest(p), ValidationError);
  }
  SUBCASE("dangling reference") {
    const auto p = write_and_try("i1,i.wav,imitation,kick,imA,nope,train\n");
    CHECK_THROWS_AS(load_manifest(p), ValidationError);
  }
  SUBCASE("reference with mismatched class") {
    const auto p = write_and_try(
        "d1,d.wav,drum,snare,,,train\ni1,i.wav,imitation,kick,imA,d1,train\n");
    CHECK_THROWS_AS(load_manifest(p), ValidationError);
  }
}

TEST_CASE("ratings load and validate") {
  const auto dir = tmpdir("vimp_ratings");
  const auto p = (dir / "r.csv").string();
  {
    std::ofstream os(p);
    os << "listener_id,trial_id,imitation_id,reference_id,rating\n";
    os << "l1,t1,i1,d1,0.5\n";
    os << "l1,t1,i1,d2,0.25\n";
    os << "l2,t1,i2,d1,-1\n";
  }
  const auto t = load_ratings(p);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[2].rating == doctest::Approx(-1.0));

  SUBCASE("header-only file is an empty table") {
    const auto q = (dir / "empty.csv").string();
    std::ofstream os(q);
    os << "listener_id,trial_id,imitation_id,reference_id,rating\n";
    os.close();
    CHECK(load_ratings(q).rows.empty());
  }
  SUBCASE("conflicting imitation within a trial") {
    const auto q = (dir / "conflict.csv").string();
    std::ofstream os(q);
    os << "listener_id,trial_id,imitation_id,reference_id,rating\n";
    os << "l1,t1,i1,d1,1\n";
    os << "l1,t1,i2,d2,1\n";
    os.close();
    CHECK_THROWS_AS(load_ratings(q), ValidationError);
  }
  SUBCASE("non-numeric rating") {
    const auto q = (dir / "nan.csv").string();
    std::ofstream os(q);
    os << "listener_id,trial_id,imitation_id,reference_id,rating\n";
    os << "l1,t1,i1,d1,abc\n";
    os.close();
    CHECK_THROWS_WITH_AS(load_ratings(q), doctest::Contains("non-numeric"), ValidationError);
  }
}

TEST_CASE("synth_dataset is byte-identical per seed") {
  const auto d1 = tmpdir("vimp_synth_a");
  const auto d2 = tmpdir("vimp_synth_b");
  SynthSpec spec;
  spec.n_per_class = 2;
  spec.imitators = 2;
  spec.seed = 99;
  spec.train_drums_per_class = 1;
  spec.train_imitations_per_class = 1;
  spec.val_drums_per_class = 1;
  spec.val_imitations_per_class = 1;
  const auto m1 = synth_dataset(spec, d1.string());
  const auto m2 = synth_dataset(spec, d2.string());
  REQUIRE(m1.records.size() == m2.records.size());
  for (std::size_t i = 0; i < m1.records.size(); ++i) {
    CHECK(m1.records[i].id == m2.records[i].id);
    CHECK(slurp(m1.records[i].path) == slurp(m2.records[i].path));
  }
}

TEST_CASE("synth_dataset matches the requested evaluation geometry") {
  const auto dir = tmpdir("vimp_synth_geom");
  SynthSpec spec;
  spec.class_counts = {{6, 6, 2, 4}};
  spec.imitators = 14;
  spec.seed = 3;
  spec.train_drums_per_class = 0;
  spec.train_imitations_per_class = 0;
  spec.val_drums_per_class = 0;
  spec.val_imitations_per_class = 0;
  const auto m = synth_dataset(spec, dir.string());
  int refs = 0, imis = 0;
  for (const auto& r : m.records) {
    if (r.sound_type == SoundType::drum) ++refs;
    else {
      ++imis;
      CHECK(!r.reference_id.empty());
    }
  }
  CHECK(refs == 18);
  CHECK(imis == 252);
}

TEST_CASE("synthetic hi-hats differ in decay and classes order by brightness across seeds") {
  for (const std::uint64_t seed : {11ull, 77ull}) {
    const auto dir = tmpdir("vimp_synth_classes_" + std::to_string(seed));
    SynthSpec spec;
    spec.n_per_class = 3;
    spec.imitators = 1;
    spec.seed = seed;
    spec.train_drums_per_class = 0;
    spec.train_imitations_per_class = 0;
    spec.val_drums_per_class = 0;
    spec.val_imitations_per_class = 0;
    const auto m = synth_dataset(spec, dir.string());

    auto envelope_at = [&](const SoundRecord& r, double t_s) {
      const Waveform w = read_wav(r.path);
      const auto env = heurfeat::rms_envelope(w, 0.010, 110);
      const std::size_t idx = static_cast<std::size_t>(t_s * w.sample_rate / 110.0);
      return idx < env.size() ? env[idx] : 0.0;
    };
    auto centroid_mean = [&](DrumType t) {
      std::vector<double> cs;
      for (const auto& r : m.records)
        if (r.sound_type == SoundType::drum && r.drum_type == t) {
          const auto fv = heurfeat::heuristic_features(read_wav(r.path));
          cs.push_back(fv.values[30]);  // scent_m
        }
      return mean_of(cs);
    };

    for (const auto& r : m.records) {
      if (r.sound_type != SoundType::drum) continue;
      if (r.drum_type == DrumType::hh_open) {
        for (const auto& q : m.records) {
          if (q.sound_type == SoundType::drum && q.drum_type == DrumType::hh_closed)
            CHECK(envelope_at(r, 0.2) > envelope_at(q, 0.2));
        }
      }
    }
    const double kick_c = centroid_mean(DrumType::kick);
    const double snare_c = centroid_mean(DrumType::snare);
    const double hh_c = 0.5 * (centroid_mean(DrumType::hh_closed) + centroid_mean(DrumType::hh_open));
    CHECK(hh_c > snare_c);
    CHECK(snare_c > kick_c);
  }
}

}  // TEST_SUITE
