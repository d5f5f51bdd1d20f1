// End-to-end training smoke: synthetic corpus -> spectrograms -> short
// CAE-SDL training, then the conditioning and embedding-geometry checks that
// need a genuinely trained model. Kept out of the fast unit suite.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <vector>

#include "vimp/cae.hpp"
#include "vimp/dataio.hpp"
#include "vimp/dsp.hpp"

using namespace vimp;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
  if (!ok) ++failures;
}

struct Corpus {
  dataio::DatasetManifest manifest;
  std::map<std::string, dsp::Spectrogram> specs;  // normalized
  dsp::NormStats norm;
};

Corpus build_corpus(const std::string& dir) {
  dataio::SynthSpec spec;
  spec.n_per_class = 2;
  spec.imitators = 3;
  spec.seed = 20240601;
  spec.train_drums_per_class = 3;
  spec.train_imitations_per_class = 3;
  spec.val_drums_per_class = 1;
  spec.val_imitations_per_class = 1;

  Corpus c;
  c.manifest = dataio::synth_dataset(spec, dir);
  std::map<std::string, dsp::Spectrogram> raw;
  for (const auto& r : c.manifest.records) {
    dataio::Waveform w = dataio::load_audio(r.path);
    dataio::Waveform t = dsp::trim_silence(w, -60.0);
    raw[r.id] = dsp::bark_spectrogram(t.samples.empty() ? w : t);
  }
  std::vector<const dsp::Spectrogram*> ptrs;
  for (const auto& [id, s] : raw) ptrs.push_back(&s);
  c.norm = dsp::compute_norm_stats(ptrs);
  for (auto& [id, s] : raw) {
    dsp::normalize(s, c.norm);
    c.specs.emplace(id, std::move(s));
  }
  return c;
}

std::vector<cae::TrainItem> items_for(const Corpus& c, dataio::Split split,
                                      const cae::ModelConfig& cfg) {
  std::vector<cae::TrainItem> items;
  for (const auto& r : c.manifest.records) {
    if (c.manifest.split.at(r.id) != split) continue;
    cae::TrainItem it;
    it.image = nn::Tensor<float>({1, cae::kImageSize, cae::kImageSize});
    const auto& s = c.specs.at(r.id);
    for (std::size_t i = 0; i < s.values.size(); ++i) it.image.data[i] = s.values[i];
    it.cond = cae::condition_index(cfg, r.sound_type, r.drum_type);
    items.push_back(std::move(it));
  }
  return items;
}

double recon_error(const cae::Cae<float>& model, const dsp::Spectrogram& s, int cond) {
  nn::Tape<float> tape;
  nn::Tensor<float> x({1, 1, cae::kImageSize, cae::kImageSize});
  for (std::size_t i = 0; i < s.values.size(); ++i) x.data[i] = s.values[i];
  const nn::Value xin = tape.leaf(x, false);
  const auto out = model.forward(tape, xin, {cond});
  return static_cast<double>(tape.value(tape.mse(out.recon, xin))[0]);
}

}  // namespace

int main() {
  const auto dir = fs::temp_directory_path() / "vimp_train_smoke";
  fs::remove_all(dir);
  const Corpus corpus = build_corpus(dir.string());

  cae::ModelConfig cfg = cae::ModelConfig::defaults(cae::Arch::cae);
  cfg.conditioning = cae::Conditioning::sdl;
  cae::TrainOptions opts;
  opts.schedule.max_epochs = 50;
  opts.batch_size = 16;
  opts.seed = 11;

  const auto train_set = items_for(corpus, dataio::Split::train, cfg);
  const auto val_set = items_for(corpus, dataio::Split::validation, cfg);
  std::printf("train=%zu val=%zu\n", train_set.size(), val_set.size());

  const cae::TrainedModel m = cae::train(cfg, train_set, val_set, opts, corpus.norm);
  check(!m.history.empty(), "training produced a history");

  double best_val = m.history[0].val_loss;
  for (const auto& h : m.history) best_val = std::min(best_val, h.val_loss);
  std::printf("epochs=%zu first_val=%.5f best_val=%.5f\n", m.history.size(),
              m.history[0].val_loss, best_val);
  check(best_val < 0.6 * m.history[0].val_loss, "validation loss dropped substantially");

  cae::Cae<float> model(m.config, 0);
  model.set_params(m.parameters);

  // conditioning smoke: held-out kicks reconstruct better under their true
  // label than under the hh_open label
  const int kick_slot = cae::condition_index(cfg, dataio::SoundType::drum, dataio::DrumType::kick);
  const int hho_slot = cae::condition_index(cfg, dataio::SoundType::drum, dataio::DrumType::hh_open);
  double err_true = 0.0, err_wrong = 0.0;
  int n_kicks = 0;
  for (const auto& r : corpus.manifest.records) {
    if (corpus.manifest.split.at(r.id) != dataio::Split::evaluation) continue;
    if (r.sound_type != dataio::SoundType::drum || r.drum_type != dataio::DrumType::kick) continue;
    err_true += recon_error(model, corpus.specs.at(r.id), kick_slot);
    err_wrong += recon_error(model, corpus.specs.at(r.id), hho_slot);
    ++n_kicks;
  }
  std::printf("held-out kicks=%d err_true=%.5f err_wrong=%.5f\n", n_kicks, err_true / n_kicks,
              err_wrong / n_kicks);
  check(n_kicks >= 2, "held-out kicks present");
  check(err_true < err_wrong, "true label reconstructs kicks better than hh_open label");

  // embeddings: inter-class mean distance exceeds intra-class mean distance
  std::map<dataio::DrumType, std::vector<std::array<double, 32>>> by_class;
  for (const auto& r : corpus.manifest.records) {
    if (corpus.manifest.split.at(r.id) != dataio::Split::evaluation) continue;
    const int slot = cae::condition_index(cfg, r.sound_type, r.drum_type);
    by_class[r.drum_type].push_back(model.embed(corpus.specs.at(r.id), slot));
  }
  auto dist = [](const std::array<double, 32>& a, const std::array<double, 32>& b) {
    double acc = 0.0;
    for (int i = 0; i < 32; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
  };
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  std::vector<std::pair<dataio::DrumType, const std::array<double, 32>*>> all;
  for (const auto& [t, vs] : by_class)
    for (const auto& v : vs) all.emplace_back(t, &v);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double d = dist(*all[i].second, *all[j].second);
      if (all[i].first == all[j].first) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  intra /= n_intra;
  inter /= n_inter;
  std::printf("intra=%.4f inter=%.4f\n", intra, inter);
  check(inter > intra, "inter-class embedding distance exceeds intra-class");

  std::printf("%s\n", failures == 0 ? "TRAIN SMOKE PASSED" : "TRAIN SMOKE FAILED");
  return failures == 0 ? 0 : 1;
}
