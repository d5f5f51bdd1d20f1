// vimp: drum-sample retrieval by vocal imitation - synthetic data, DSP
// front-end, autoencoder training, evaluation metrics and query tooling.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "vimp/cae.hpp"
#include "vimp/dataio.hpp"
#include "vimp/dsp.hpp"
#include "vimp/evalmetrics.hpp"
#include "vimp/heurfeat.hpp"
#include "vimp/retrieval.hpp"

namespace fs = std::filesystem;
using namespace vimp;

namespace {

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n ? static_cast<int>(n) : 1;
}

// VIMP_CACHE_DIR provides the default spectrogram cache location.
std::string env_cache_dir() {
  const char* v = std::getenv("VIMP_CACHE_DIR");
  return v ? v : "";
}

// --- shared pipeline helpers ---------------------------------------------------

dataio::Waveform load_trimmed(const std::string& path) {
  dataio::Waveform w = dataio::load_audio(path);
  dataio::Waveform t = dsp::trim_silence(w, -60.0);
  return t.samples.empty() ? w : t;
}

dsp::AugmentConfig augment_ranges(dataio::SoundType st) {
  dsp::AugmentConfig cfg;
  if (st == dataio::SoundType::drum) {
    cfg.pitch_semitones = {-1.0, 1.0};
    cfg.stretch_factor = {0.7, 1.3};
  } else {
    cfg.pitch_semitones = {-1.5, 1.5};
    cfg.stretch_factor = {0.8, 1.2};
  }
  return cfg;
}

std::string spec_path(const std::string& cache_dir, const std::string& id) {
  return (fs::path(cache_dir) / (id + ".spec")).string();
}

dsp::NormStats load_norm_stats(const std::string& cache_dir) {
  const auto p = fs::path(cache_dir) / "norm_stats.json";
  std::ifstream is(p);
  if (!is) throw IoError("cannot open " + p.string() + " (run preprocess first)");
  nlohmann::json j;
  is >> j;
  dsp::NormStats st;
  st.lo = j.at("lo").get<float>();
  st.hi = j.at("hi").get<float>();
  return st;
}

// generic key=value experiment config
std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

metrics::EmbeddingSet load_embedding_set(const std::string& csv, const dataio::DatasetManifest& manifest,
                                         bool evaluation_only = true) {
  return metrics::EmbeddingSet::from(manifest, heurfeat::read_feature_csv(csv), evaluation_only);
}

// --- subcommands ------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int per_class = 6;
  int imitators = 14;
  std::uint64_t seed = 1;
  std::string counts;
  int train_per_class = 3;
  int train_imis_per_class = 6;
  int val_per_class = 1;
  int val_imis_per_class = 2;
};

int cmd_synth(const SynthArgs& a) {
  dataio::SynthSpec spec;
  spec.n_per_class = a.per_class;
  spec.imitators = a.imitators;
  spec.seed = a.seed;
  spec.train_drums_per_class = a.train_per_class;
  spec.train_imitations_per_class = a.train_imis_per_class;
  spec.val_drums_per_class = a.val_per_class;
  spec.val_imitations_per_class = a.val_imis_per_class;
  if (!a.counts.empty()) {
    const auto parts = split(a.counts, ',');
    if (parts.size() != 4) throw ValidationError("--counts wants 4 comma-separated values");
    std::array<int, 4> c{};
    for (int i = 0; i < 4; ++i) c[i] = std::stoi(parts[i]);
    spec.class_counts = c;
  }
  const auto manifest = dataio::synth_dataset(spec, a.out);
  std::printf("wrote %zu records under %s\n", manifest.records.size(), a.out.c_str());
  return 0;
}

struct PreprocessArgs {
  std::string manifest;
  std::string out;
  int augment = 0;
  int jobs = default_jobs();
};

int cmd_preprocess(const PreprocessArgs& a) {
  const auto manifest = dataio::load_manifest(a.manifest);
  fs::create_directories(a.out);

  // expand augmented records; evaluation sounds pass through untouched
  struct Job {
    dataio::SoundRecord rec;
    dataio::Split split = dataio::Split::train;
    std::string source_path;
    std::uint64_t aug_seed = 0;
    bool augmented = false;
  };
  std::vector<Job> jobs_list;
  for (const auto& r : manifest.records) {
    const auto split = manifest.split.at(r.id);
    if (a.augment > 0 && split != dataio::Split::evaluation) {
      for (int k = 0; k < a.augment; ++k) {
        Job j;
        j.rec = r;
        j.rec.id = r.id + "_aug" + std::to_string(k);
        j.rec.reference_id.clear();  // training material carries no pairing
        j.rec.path = (fs::path(a.out) / (j.rec.id + ".wav")).string();
        j.split = split;
        j.source_path = r.path;
        j.aug_seed = splitmix64(hash_str(r.id) ^ static_cast<std::uint64_t>(k + 1));
        j.augmented = true;
        jobs_list.push_back(std::move(j));
      }
    } else {
      Job j;
      j.rec = r;
      j.split = split;
      j.source_path = r.path;
      jobs_list.push_back(std::move(j));
    }
  }

  std::vector<dsp::Spectrogram> specs(jobs_list.size());
  parallel_for(jobs_list.size(), a.jobs, [&](std::size_t i) {
    Job& j = jobs_list[i];
    dataio::Waveform w = load_trimmed(j.source_path);
    if (j.augmented) {
      w = dsp::augment(w, augment_ranges(j.rec.sound_type), j.aug_seed);
      dataio::write_wav(j.rec.path, w);
    }
    specs[i] = dsp::bark_spectrogram(w);
  });

  std::vector<const dsp::Spectrogram*> ptrs;
  ptrs.reserve(specs.size());
  for (const auto& s : specs) ptrs.push_back(&s);
  const dsp::NormStats stats = dsp::compute_norm_stats(ptrs);

  parallel_for(jobs_list.size(), a.jobs, [&](std::size_t i) {
    dsp::normalize(specs[i], stats);
    dsp::save_spectrogram(spec_path(a.out, jobs_list[i].rec.id), specs[i]);
  });

  dataio::DatasetManifest out_manifest;
  for (const auto& j : jobs_list) {
    out_manifest.records.push_back(j.rec);
    out_manifest.split[j.rec.id] = j.split;
  }
  out_manifest.validate();
  dataio::save_manifest(out_manifest, (fs::path(a.out) / "manifest.csv").string());
  {
    nlohmann::json j;
    j["lo"] = stats.lo;
    j["hi"] = stats.hi;
    std::ofstream os(fs::path(a.out) / "norm_stats.json");
    os << j.dump(2) << "\n";
  }
  std::printf("cached %zu spectrograms (%d augmented copies per training sound) in %s\n",
              jobs_list.size(), a.augment, a.out.c_str());
  return 0;
}

struct FeaturesArgs {
  std::string manifest;
  std::string out;
  int jobs = default_jobs();
};

int cmd_features(const FeaturesArgs& a) {
  const auto manifest = dataio::load_manifest(a.manifest);
  std::vector<heurfeat::FeatureVector> fvs(manifest.records.size());
  parallel_for(manifest.records.size(), a.jobs, [&](std::size_t i) {
    const auto& r = manifest.records[i];
    fvs[i] = heurfeat::heuristic_features(load_trimmed(r.path), r.id);
  });
  heurfeat::write_feature_csv(a.out, heurfeat::to_table(fvs));
  std::printf("wrote %zu feature rows to %s\n", fvs.size(), a.out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path) {
  const auto kv = read_kv_config(config_path);
  auto get = [&](const std::string& key, const std::string& def) {
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
  };
  auto require = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(config_path + ": missing required key '" + key + "'");
    return it->second;
  };
  const std::set<std::string> known = {
      "manifest",    "cache_dir",           "out_dir",          "arch",           "conditioning",
      "variational", "decoder",             "encoder",          "filters",        "kernel",
      "latent",      "kl_weight",           "lr",               "batch_size",     "max_epochs",
      "early_stop_patience", "plateau_patience", "plateau_factor", "seeds",        "jobs"};
  for (const auto& [k, v] : kv) {
    (void)v;
    if (!known.count(k)) throw ConfigError(config_path + ": unknown key '" + k + "'");
  }

  cae::ModelConfig cfg = cae::ModelConfig::defaults(cae::parse_arch(get("arch", "cae")));
  cfg.conditioning = cae::parse_conditioning(get("conditioning", "none"));
  cfg.variational = lower(get("variational", "false")) == "true";
  if (kv.count("decoder")) cfg.decoder = cae::parse_decoder_mode(kv.at("decoder"));
  if (kv.count("encoder")) cfg.encoder = cae::parse_encoder_downsample(kv.at("encoder"));
  if (kv.count("filters")) {
    const auto parts = split(kv.at("filters"), ',');
    if (parts.size() != 4) throw ConfigError("filters wants 4 comma-separated counts");
    for (int i = 0; i < 4; ++i) cfg.filters[i] = std::stoi(parts[i]);
  }
  cfg.kernel = std::stoi(get("kernel", std::to_string(cfg.kernel)));
  cfg.latent = std::stoi(get("latent", "32"));
  cfg.kl_weight = std::stod(get("kl_weight", "1.0"));
  cfg.validate();

  cae::TrainOptions opts;
  opts.schedule.initial_lr = std::stod(get("lr", "1e-3"));
  opts.batch_size = std::stoi(get("batch_size", "64"));
  opts.schedule.max_epochs = std::stoi(get("max_epochs", "200"));
  opts.schedule.early_stop_patience = std::stoi(get("early_stop_patience", "10"));
  opts.schedule.plateau_patience = std::stoi(get("plateau_patience", "5"));
  opts.schedule.plateau_factor = std::stod(get("plateau_factor", "0.2"));

  std::vector<std::uint64_t> seeds;
  for (const auto& s : split(get("seeds", "1,2,3,4,5"), ',')) seeds.push_back(std::stoull(trim(s)));
  const int jobs = std::stoi(get("jobs", std::to_string(default_jobs())));

  const auto manifest = dataio::load_manifest(require("manifest"));
  const std::string cache_dir = require("cache_dir");
  const std::string out_dir = require("out_dir");
  fs::create_directories(out_dir);
  const dsp::NormStats norm = load_norm_stats(cache_dir);

  auto gather = [&](dataio::Split split) {
    std::vector<cae::TrainItem> items;
    for (const auto& r : manifest.records) {
      if (manifest.split.at(r.id) != split) continue;
      const auto s = dsp::load_spectrogram(spec_path(cache_dir, r.id));
      cae::TrainItem it;
      it.image = nn::Tensor<float>({1, cae::kImageSize, cae::kImageSize});
      std::copy(s.values.begin(), s.values.end(), it.image.data.begin());
      it.cond = cae::condition_index(cfg, r.sound_type, r.drum_type);
      items.push_back(std::move(it));
    }
    return items;
  };
  const auto train_set = gather(dataio::Split::train);
  const auto val_set = gather(dataio::Split::validation);
  std::printf("training %s/%s on %zu samples (validation %zu), %zu seeds\n",
              cae::to_string(cfg.arch).c_str(), cae::to_string(cfg.conditioning).c_str(),
              train_set.size(), val_set.size(), seeds.size());

  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    cae::TrainOptions o = opts;
    o.seed = seeds[i];
    const cae::TrainedModel m = cae::train(cfg, train_set, val_set, o, norm);
    const std::string tag = "seed" + std::to_string(seeds[i]);
    cae::save_trained((fs::path(out_dir) / ("model_" + tag + ".ckpt")).string(), m);
    std::vector<std::vector<std::string>> rows = {{"epoch", "train_loss", "val_loss", "lr"}};
    for (std::size_t e = 0; e < m.history.size(); ++e) {
      char t[32], v[32], l[32];
      std::snprintf(t, sizeof(t), "%.8g", m.history[e].train_loss);
      std::snprintf(v, sizeof(v), "%.8g", m.history[e].val_loss);
      std::snprintf(l, sizeof(l), "%.8g", m.history[e].lr);
      rows.push_back({std::to_string(e + 1), t, v, l});
    }
    write_csv((fs::path(out_dir) / ("history_" + tag + ".csv")).string(), rows);
    double best = m.history[0].val_loss;
    for (const auto& h : m.history) best = std::min(best, h.val_loss);
    std::printf("seed %llu: %zu epochs, best val %.6g\n",
                static_cast<unsigned long long>(seeds[i]), m.history.size(), best);
  });
  return 0;
}

struct EmbedArgs {
  std::string checkpoint;
  std::string manifest;
  std::string cache;
  std::string out;
  std::string label_mode = "auto";
  std::string sound_type = "imitation";
  std::string drum_type;
};

int cmd_embed(EmbedArgs a) {
  if (a.cache.empty()) a.cache = env_cache_dir();
  if (a.cache.empty())
    throw ValidationError("no spectrogram cache given (--cache or VIMP_CACHE_DIR)");
  const auto manifest = dataio::load_manifest(a.manifest);
  const cae::TrainedModel m = cae::load_trained(a.checkpoint);
  cae::Cae<float> model(m.config, 0);
  model.set_params(m.parameters);

  std::optional<int> fixed_cond;
  if (a.label_mode == "flag") {
    if (m.config.condition_dim() > 0) {
      if (a.drum_type.empty()) throw ValidationError("--label-mode flag requires --drum-type");
      fixed_cond = cae::condition_index(m.config, dataio::parse_sound_type(a.sound_type),
                                        dataio::parse_drum_type(a.drum_type));
    } else {
      fixed_cond = -1;
    }
  } else if (a.label_mode != "auto") {
    throw ValidationError("--label-mode must be auto or flag");
  }

  heurfeat::FeatureTable table;
  for (int i = 0; i < 32; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "z%02d", i);
    table.names.push_back(buf);
  }
  for (const auto& r : manifest.records) {
    const auto sp = spec_path(a.cache, r.id);
    if (!fs::exists(sp)) continue;  // only records present in the cache
    const auto spec = dsp::load_spectrogram(sp);
    const int cond = fixed_cond ? *fixed_cond
                                : (m.config.condition_dim() > 0
                                       ? cae::condition_index(m.config, r.sound_type, r.drum_type)
                                       : -1);
    const auto e = model.embed(spec, cond);
    table.rows.emplace_back(r.id, std::vector<double>(e.begin(), e.end()));
  }
  if (table.rows.empty()) throw ValidationError("no cached spectrograms matched the manifest");
  heurfeat::write_feature_csv(a.out, table);
  std::printf("wrote %zu embeddings to %s\n", table.rows.size(), a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::vector<std::string> embeddings;
  std::string manifest;
  std::string ratings;
  std::string out;
  int n_perm = 999;
  int mss_runs = 5;
  std::uint64_t seed = 1;
  bool within_class = false;
};

int cmd_eval(const EvalArgs& a) {
  const auto manifest = dataio::load_manifest(a.manifest);
  std::optional<dataio::RatingsTable> ratings;
  if (!a.ratings.empty()) ratings = dataio::load_ratings(a.ratings);

  std::unordered_map<std::string, std::string> imitator_of;
  for (const auto& r : manifest.records)
    if (r.sound_type == dataio::SoundType::imitation) imitator_of[r.id] = r.imitator_id;

  metrics::MetricReport report;
  if (!ratings) report.notes.push_back("perception metrics skipped: no ratings table given");

  for (const auto& csv : a.embeddings) {
    const auto set = load_embedding_set(csv, manifest);
    metrics::RunMetrics run;
    run.label = fs::path(csv).stem().string();
    const auto mrr_res = metrics::mrr(set, a.within_class);
    run.mrr = mrr_res.overall_percent;
    for (const auto& w : mrr_res.warnings) report.notes.push_back(run.label + ": " + w);
    const auto mss_res = metrics::mss(set, a.mss_runs, a.n_perm, a.seed);
    run.mss = mss_res.mss_percent;
    for (const auto& w : mss_res.warnings) report.notes.push_back(run.label + ": " + w);
    if (ratings) {
      const auto acc = metrics::slope_accuracy(set, *ratings);
      run.accuracy = acc.percent;
      for (const auto& w : acc.warnings) report.notes.push_back(run.label + ": " + w);
      const auto dist = metrics::within_class_distances(set);
      const auto fit = metrics::fit_lmm(*ratings, dist.distance, imitator_of);
      run.aic = fit.aic;
    }
    report.per_run.push_back(run);
  }
  report.summarize();

  std::ofstream os(a.out);
  if (!os) throw IoError("cannot write " + a.out);
  os << report.to_json() << "\n";
  std::printf("wrote %s (%zu runs)\n", a.out.c_str(), report.per_run.size());
  for (const auto& run : report.per_run) {
    std::printf("  %-24s mrr=%6.2f mss=%6.2f", run.label.c_str(), run.mrr.value_or(-1),
                run.mss.value_or(-1));
    if (run.accuracy) std::printf(" accuracy=%6.2f aic=%.1f", *run.accuracy, run.aic.value_or(0));
    std::printf("\n");
  }
  return 0;
}

struct HeatmapArgs {
  std::string embeddings;
  std::string manifest;
  std::string out_prefix;
  int n_perm = 999;
  int runs = 5;
  std::uint64_t seed = 1;
};

int cmd_heatmap(const HeatmapArgs& a) {
  const auto manifest = dataio::load_manifest(a.manifest);
  const auto set = load_embedding_set(a.embeddings, manifest);
  const auto res = metrics::mss(set, a.runs, a.n_perm, a.seed);
  metrics::write_heatmap_csv(a.out_prefix + ".csv", res);
  metrics::write_heatmap_svg(a.out_prefix + ".svg", res);
  std::printf("mss=%.2f%% (aggregated %.2f%%); wrote %s.csv and %s.svg\n", res.mss_percent,
              res.mss_aggregated_percent, a.out_prefix.c_str(), a.out_prefix.c_str());
  for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

struct IndexArgs {
  std::string embeddings;
  std::string manifest;
  std::string out;
  bool all_splits = false;
};

int cmd_index(const IndexArgs& a) {
  const auto manifest = dataio::load_manifest(a.manifest);
  const auto set = load_embedding_set(a.embeddings, manifest, !a.all_splits);
  const auto idx = retrieval::build_index(set);
  retrieval::save_index(a.out, idx);
  std::printf("indexed %zu drums into %s\n", idx.entries.size(), a.out.c_str());
  return 0;
}

struct QueryArgs {
  std::string index;
  std::string wav;
  std::string model;
  std::string drum_type;
  std::string filter_class;
  int k = 5;
};

int cmd_query(const QueryArgs& a) {
  const auto idx = retrieval::load_index(a.index);
  const cae::TrainedModel m = cae::load_trained(a.model);

  dataio::Waveform w = load_trimmed(a.wav);
  dsp::Spectrogram spec = dsp::bark_spectrogram(w);
  dsp::normalize(spec, m.norm);

  std::optional<int> cond;
  if (m.config.condition_dim() > 0) {
    if (a.drum_type.empty())
      throw ValidationError("conditional model: --drum-type is required for the query label");
    cond = cae::condition_index(m.config, dataio::SoundType::imitation,
                                dataio::parse_drum_type(a.drum_type));
  } else if (!a.drum_type.empty()) {
    throw ValidationError("unconditional model does not take --drum-type");
  }
  const auto e = cae::embed(m, spec, cond);

  std::optional<dataio::DrumType> filter;
  if (!a.filter_class.empty()) filter = dataio::parse_drum_type(a.filter_class);
  const auto hits = retrieval::query(idx, std::vector<double>(e.begin(), e.end()), a.k, filter);
  for (std::size_t i = 0; i < hits.size(); ++i)
    std::printf("%zu\t%s\t%.6f\n", i + 1, hits[i].id.c_str(), hits[i].distance);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drum sample retrieval by vocal imitation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "generate a deterministic synthetic corpus");
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--per-class", synth.per_class, "reference drums per class");
  c_synth->add_option("--imitators", synth.imitators, "number of imitators");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--counts", synth.counts,
                      "per-class reference counts kick,snare,hh_closed,hh_open");
  c_synth->add_option("--train-per-class", synth.train_per_class, "training drums per class");
  c_synth->add_option("--train-imis-per-class", synth.train_imis_per_class,
                      "training imitations per class");
  c_synth->add_option("--val-per-class", synth.val_per_class, "validation drums per class");
  c_synth->add_option("--val-imis-per-class", synth.val_imis_per_class,
                      "validation imitations per class");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "trim, augment and cache normalized spectrograms");
  c_pre->add_option("--manifest", pre.manifest, "input manifest CSV")->required();
  c_pre->add_option("--out", pre.out, "cache directory")->required();
  c_pre->add_option("--augment", pre.augment, "augmented copies per train/validation sound");
  c_pre->add_option("--jobs", pre.jobs, "worker threads");

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "extract the 32-dim heuristic feature set");
  c_feat->add_option("--manifest", feat.manifest, "input manifest CSV")->required();
  c_feat->add_option("--out", feat.out, "output CSV")->required();
  c_feat->add_option("--jobs", feat.jobs, "worker threads");

  std::string train_config;
  auto* c_train = app.add_subcommand("train", "train autoencoder models per experiment config");
  c_train->add_option("--config", train_config, "key=value experiment config")->required();

  EmbedArgs emb;
  auto* c_embed = app.add_subcommand("embed", "compute learned embeddings from a checkpoint");
  c_embed->add_option("--checkpoint", emb.checkpoint, "model checkpoint")->required();
  c_embed->add_option("--manifest", emb.manifest, "manifest CSV")->required();
  c_embed->add_option("--cache", emb.cache, "preprocess cache directory (default $VIMP_CACHE_DIR)");
  c_embed->add_option("--out", emb.out, "output CSV")->required();
  c_embed->add_option("--label-mode", emb.label_mode, "auto (manifest labels) or flag");
  c_embed->add_option("--sound-type", emb.sound_type, "label for --label-mode flag");
  c_embed->add_option("--drum-type", emb.drum_type, "label for --label-mode flag");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "run the evaluation metrics over embeddings");
  c_eval->add_option("--embeddings", ev.embeddings, "embeddings CSV (repeat for multi-seed)")
      ->required()
      ->take_all();
  c_eval->add_option("--manifest", ev.manifest, "manifest CSV")->required();
  c_eval->add_option("--ratings", ev.ratings, "listener ratings CSV (enables perception metrics)");
  c_eval->add_option("--out", ev.out, "output report JSON")->required();
  c_eval->add_option("--n-perm", ev.n_perm, "Mantel permutations");
  c_eval->add_option("--mss-runs", ev.mss_runs, "Mantel re-seedings averaged per cell");
  c_eval->add_option("--seed", ev.seed, "metric seed");
  c_eval->add_flag("--within-class", ev.within_class, "restrict MRR candidates to the query class");

  HeatmapArgs hm;
  auto* c_heat = app.add_subcommand("heatmap", "per-imitator Mantel p-value heatmap (CSV + SVG)");
  c_heat->add_option("--embeddings", hm.embeddings, "embeddings CSV")->required();
  c_heat->add_option("--manifest", hm.manifest, "manifest CSV")->required();
  c_heat->add_option("--out", hm.out_prefix, "output path prefix")->required();
  c_heat->add_option("--n-perm", hm.n_perm, "Mantel permutations");
  c_heat->add_option("--runs", hm.runs, "Mantel re-seedings averaged per cell");
  c_heat->add_option("--seed", hm.seed, "metric seed");

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "build a drum retrieval index from embeddings");
  c_index->add_option("--embeddings", ix.embeddings, "embeddings CSV")->required();
  c_index->add_option("--manifest", ix.manifest, "manifest CSV")->required();
  c_index->add_option("--out", ix.out, "output index file")->required();
  c_index->add_flag("--all-splits", ix.all_splits, "index drums from every split");

  QueryArgs q;
  auto* c_query = app.add_subcommand("query", "rank library drums against a vocal imitation WAV");
  c_query->add_option("--index", q.index, "index file")->required();
  c_query->add_option("--wav", q.wav, "query WAV")->required();
  c_query->add_option("--model", q.model, "model checkpoint")->required();
  c_query->add_option("--drum-type", q.drum_type, "imitated drum type (conditional models)");
  c_query->add_option("--filter-class", q.filter_class, "restrict candidates to one drum type");
  c_query->add_option("--k", q.k, "number of results");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_pre->parsed()) return cmd_preprocess(pre);
    if (c_feat->parsed()) return cmd_features(feat);
    if (c_train->parsed()) return cmd_train(train_config);
    if (c_embed->parsed()) return cmd_embed(emb);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_heat->parsed()) return cmd_heatmap(hm);
    if (c_index->parsed()) return cmd_index(ix);
    if (c_query->parsed()) return cmd_query(q);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
