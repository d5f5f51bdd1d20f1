#include "vimp/heurfeat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

#include "vimp/dsp.hpp"

namespace vimp::heurfeat {

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    for (int i = 0; i < kMfccCount; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "mfcc%02d_m", i + 1);
      n[i] = buf;
      std::snprintf(buf, sizeof(buf), "mfcc%02d_d", i + 1);
      n[kMfccCount + i] = buf;
    }
    n[24] = "duration";
    n[25] = "deram";
    n[26] = "loud_m";
    n[27] = "loud_s";
    n[28] = "pitch_m";
    n[29] = "pitch_s";
    n[30] = "scent_m";
    n[31] = "scent_s";
    return n;
  }();
  return names;
}

std::vector<std::vector<double>> dct_matrix(int n_out, int n_in) {
  std::vector<std::vector<double>> m(n_out, std::vector<double>(n_in));
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n)
      m[k][n] = scale * std::cos(M_PI * (2.0 * n + 1.0) * k / (2.0 * n_in));
  }
  return m;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

struct MelFilter {
  std::vector<std::pair<int, double>> weights;  // sum to 1
};

const std::vector<MelFilter>& mel_filterbank() {
  static std::vector<MelFilter> bank;
  static std::once_flag once;
  std::call_once(once, [] {
    const double sr = dataio::kCanonicalRate;
    const int n_bins = dsp::kWindowSize / 2 + 1;
    const int n_points = kMelBands + 2;
    std::vector<double> hz(n_points);
    const double m_lo = hz_to_mel(0.0), m_hi = hz_to_mel(sr / 2.0);
    for (int i = 0; i < n_points; ++i)
      hz[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / static_cast<double>(n_points - 1));

    bank.resize(kMelBands);
    for (int b = 0; b < kMelBands; ++b) {
      const double left = hz[b], center = hz[b + 1], right = hz[b + 2];
      double sum = 0.0;
      for (int k = 0; k < n_bins; ++k) {
        const double f = k * sr / dsp::kWindowSize;
        double wgt = 0.0;
        if (f > left && f <= center) wgt = (f - left) / (center - left);
        else if (f > center && f < right) wgt = (right - f) / (right - center);
        if (wgt > 0.0) {
          bank[b].weights.emplace_back(k, wgt);
          sum += wgt;
        }
      }
      if (sum > 0.0)
        for (auto& [k, wgt] : bank[b].weights) wgt /= sum;
    }
  });
  return bank;
}

const std::vector<std::vector<double>>& mfcc_dct() {
  static const std::vector<std::vector<double>> m = dct_matrix(kMfccCount + 1, kMelBands);
  return m;
}

}  // namespace

std::vector<std::array<double, kMfccCount>> mfcc(const Waveform& w) {
  const auto frames = dsp::power_stft(w);
  const auto& bank = mel_filterbank();
  const auto& dct = mfcc_dct();

  std::vector<std::array<double, kMfccCount>> out(frames.size());
  std::vector<double> logmel(kMelBands);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (int b = 0; b < kMelBands; ++b) {
      double e = 0.0;
      for (const auto& [k, wgt] : bank[b].weights) e += wgt * frames[t][k];
      logmel[b] = std::log(std::max(e, 1e-10));
    }
    for (int c = 1; c <= kMfccCount; ++c) {
      double acc = 0.0;
      for (int b = 0; b < kMelBands; ++b) acc += dct[c][b] * logmel[b];
      out[t][c - 1] = acc;
    }
  }
  return out;
}

std::vector<double> yin_pitch(const Waveform& w) {
  const int frame = dsp::kWindowSize;
  const int hop = dsp::kHopSize;
  const double sr = w.sample_rate;
  const int tau_min = std::max(2, static_cast<int>(sr / 2000.0));
  const int tau_max = static_cast<int>(sr / 40.0);  // 1102 at 44100 Hz
  const int W = frame - tau_max;                    // integration window

  std::vector<double> x = w.samples;
  if (x.size() < static_cast<std::size_t>(frame)) x.resize(frame, 0.0);
  const std::size_t n_frames = 1 + (x.size() - frame) / hop;

  std::vector<double> track(n_frames, 0.0);
  std::vector<double> d(tau_max + 1), cmnd(tau_max + 1);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* s = x.data() + t * hop;
    d[0] = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
      double acc = 0.0;
      for (int j = 0; j < W; ++j) {
        const double diff = s[j] - s[j + tau];
        acc += diff * diff;
      }
      d[tau] = acc;
    }
    cmnd[0] = 1.0;
    double running = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
      running += d[tau];
      cmnd[tau] = running > 0.0 ? d[tau] * tau / running : 1.0;
    }

    int tau = -1;
    for (int k = tau_min; k <= tau_max; ++k) {
      if (cmnd[k] < 0.15) {
        while (k + 1 <= tau_max && cmnd[k + 1] < cmnd[k]) ++k;
        tau = k;
        break;
      }
    }
    if (tau < 0) continue;  // unvoiced

    double better = tau;
    if (tau > tau_min && tau < tau_max) {
      const double s0 = cmnd[tau - 1], s1 = cmnd[tau], s2 = cmnd[tau + 1];
      const double denom = 2.0 * (2.0 * s1 - s2 - s0);
      if (std::abs(denom) > 1e-12) better = tau + (s2 - s0) / denom;
    }
    track[t] = sr / better;
  }
  return track;
}

std::vector<double> rms_envelope(const Waveform& w, double window_s, int hop) {
  const int win = std::max(1, static_cast<int>(std::lround(window_s * w.sample_rate)));
  if (hop <= 0) hop = std::max(1, win / 4);
  std::vector<double> env;
  const std::size_t n = w.samples.size();
  for (std::size_t s = 0; s < n; s += hop) {
    const std::size_t e = std::min(n, s + static_cast<std::size_t>(win));
    double acc = 0.0;
    for (std::size_t i = s; i < e; ++i) acc += w.samples[i] * w.samples[i];
    env.push_back(std::sqrt(acc / static_cast<double>(e - s)));
  }
  return env;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

}  // namespace

FeatureVector heuristic_features(const Waveform& w, const std::string& source_id) {
  if (w.samples.empty()) throw ValidationError("heuristic_features: empty waveform");
  FeatureVector fv;
  fv.source_id = source_id;

  // MFCC means and frame-delta means
  const auto coeffs = mfcc(w);
  for (int c = 0; c < kMfccCount; ++c) {
    double m = 0.0;
    for (const auto& fr : coeffs) m += fr[c];
    fv.values[c] = m / static_cast<double>(coeffs.size());
    double dm = 0.0;
    for (std::size_t t = 1; t < coeffs.size(); ++t) dm += coeffs[t][c] - coeffs[t - 1][c];
    fv.values[kMfccCount + c] = coeffs.size() > 1 ? dm / static_cast<double>(coeffs.size() - 1) : 0.0;
  }

  fv.values[24] = w.duration_s();

  // DerAM: mean envelope derivative after the maximum; the mean telescopes to
  // the end-to-end slope over that region.
  const int env_hop = std::max(1, static_cast<int>(std::lround(0.010 * w.sample_rate)) / 4);
  const auto env = rms_envelope(w, 0.010, env_hop);
  const std::size_t imax = static_cast<std::size_t>(
      std::max_element(env.begin(), env.end()) - env.begin());
  if (imax + 1 < env.size()) {
    const double dt = (static_cast<double>(env.size() - 1) - static_cast<double>(imax)) * env_hop /
                      w.sample_rate;
    fv.values[25] = (env.back() - env[imax]) / dt;
  } else {
    fv.values[25] = 0.0;
  }

  // loudness: per-frame RMS in dB on the STFT grid
  {
    std::vector<double> x = w.samples;
    if (x.size() < static_cast<std::size_t>(dsp::kWindowSize)) x.resize(dsp::kWindowSize, 0.0);
    const std::size_t n_frames = 1 + (x.size() - dsp::kWindowSize) / dsp::kHopSize;
    std::vector<double> loud(n_frames);
    for (std::size_t t = 0; t < n_frames; ++t) {
      double acc = 0.0;
      for (int i = 0; i < dsp::kWindowSize; ++i) {
        const double v = x[t * dsp::kHopSize + i];
        acc += v * v;
      }
      loud[t] = 20.0 * std::log10(std::max(std::sqrt(acc / dsp::kWindowSize), 1e-12));
    }
    auto [m, s] = mean_std(loud);
    fv.values[26] = m;
    fv.values[27] = s;
  }

  // pitch over voiced frames
  {
    const auto track = yin_pitch(w);
    std::vector<double> voiced;
    for (double f : track)
      if (f > 0.0) voiced.push_back(f);
    auto [m, s] = mean_std(voiced);
    fv.values[28] = m;
    fv.values[29] = s;
  }

  // spectral centroid (linear Hz, power weighted) over non-silent frames
  {
    const auto frames = dsp::power_stft(w);
    std::vector<double> cent;
    for (const auto& p : frames) {
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double f = static_cast<double>(k) * w.sample_rate / dsp::kWindowSize;
        num += f * p[k];
        den += p[k];
      }
      if (den > 0.0) cent.push_back(num / den);
    }
    auto [m, s] = mean_std(cent);
    fv.values[30] = m;
    fv.values[31] = s;
  }

  for (double v : fv.values)
    if (!std::isfinite(v)) throw ValidationError("heuristic_features: non-finite feature value");
  return fv;
}

void write_feature_csv(const std::string& path, const FeatureTable& t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"source_id"};
  header.insert(header.end(), t.names.begin(), t.names.end());
  rows.push_back(header);
  for (const auto& [id, values] : t.rows) {
    if (values.size() != t.names.size())
      throw ValidationError("feature row '" + id + "' has wrong width");
    std::vector<std::string> row = {id};
    for (double v : values) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      row.push_back(buf);
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, rows);
}

FeatureTable read_feature_csv(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 2 || trim(rows[0][0]) != "source_id")
    throw ValidationError(path + ": bad feature CSV header");
  FeatureTable t;
  for (std::size_t i = 1; i < rows[0].size(); ++i) t.names.push_back(trim(rows[0][i]));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != rows[0].size())
      throw ValidationError(path + " row " + std::to_string(i + 1) + ": wrong column count");
    std::vector<double> values(t.names.size());
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      try {
        std::size_t pos = 0;
        values[j] = std::stod(r[j + 1], &pos);
        if (pos != trim(r[j + 1]).size() && pos != r[j + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError(path + " row " + std::to_string(i + 1) + ": non-numeric value '" + r[j + 1] +
                              "'");
      }
      if (!std::isfinite(values[j]))
        throw ValidationError(path + " row " + std::to_string(i + 1) + ": non-finite value");
    }
    t.rows.emplace_back(trim(r[0]), std::move(values));
  }
  return t;
}

FeatureTable to_table(const std::vector<FeatureVector>& v) {
  FeatureTable t;
  const auto& names = feature_names();
  t.names.assign(names.begin(), names.end());
  for (const auto& fv : v)
    t.rows.emplace_back(fv.source_id, std::vector<double>(fv.values.begin(), fv.values.end()));
  return t;
}

}  // namespace vimp::heurfeat
