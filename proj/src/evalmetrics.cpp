#include "vimp/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

namespace vimp::metrics {

const EmbeddingSet::Entry* EmbeddingSet::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

EmbeddingSet EmbeddingSet::from(const dataio::DatasetManifest& manifest,
                                const heurfeat::FeatureTable& table, bool evaluation_only) {
  EmbeddingSet set;
  set.feature_names = table.names;
  std::unordered_map<std::string, const dataio::SoundRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.id] = &r;

  for (const auto& [id, values] : table.rows) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ValidationError("embedding id '" + id + "' does not resolve in the manifest");
    if (evaluation_only) {
      auto sp = manifest.split.find(id);
      if (sp == manifest.split.end() || sp->second != dataio::Split::evaluation) continue;
    }
    Entry e;
    e.id = id;
    e.values = values;
    e.sound_type = it->second->sound_type;
    e.drum_type = it->second->drum_type;
    e.imitator_id = it->second->imitator_id;
    e.reference_id = it->second->reference_id;
    set.entries.push_back(std::move(e));
  }
  for (const auto& e : set.entries)
    if (e.values.size() != set.feature_names.size())
      throw ValidationError("embedding '" + e.id + "' has inconsistent dimension");
  return set;
}

std::vector<std::vector<double>> standardize_columns(const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out = rows;
  if (rows.empty()) return out;
  const std::size_t d = rows[0].size();
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (const auto& r : rows) m += r[j];
    m /= static_cast<double>(rows.size());
    double s = 0.0;
    for (const auto& r : rows) s += (r[j] - m) * (r[j] - m);
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (s <= 1e-12) {
      for (auto& r : out) r[j] = 0.0;  // constant dimension dropped
    } else {
      for (auto& r : out) r[j] = (r[j] - m) / s;
    }
  }
  return out;
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("euclidean: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

// --- MRR -------------------------------------------------------------------------

MrrResult mrr(const EmbeddingSet& emb, bool within_class_only) {
  MrrResult res;
  std::vector<std::vector<double>> rows;
  rows.reserve(emb.entries.size());
  for (const auto& e : emb.entries) rows.push_back(e.values);
  const auto z = standardize_columns(rows);

  std::vector<std::size_t> refs;
  for (std::size_t i = 0; i < emb.entries.size(); ++i)
    if (emb.entries[i].sound_type == dataio::SoundType::drum) refs.push_back(i);
  if (refs.empty()) throw ValidationError("mrr: no reference drums in the evaluation set");

  std::map<std::string, std::vector<double>> rr_by_imitator;
  for (std::size_t i = 0; i < emb.entries.size(); ++i) {
    const auto& q = emb.entries[i];
    if (q.sound_type != dataio::SoundType::imitation) continue;
    if (q.reference_id.empty()) {
      res.warnings.push_back("imitation '" + q.id + "' has no reference_id; excluded");
      continue;
    }
    struct Cand {
      double d;
      const std::string* id;
    };
    std::vector<Cand> cands;
    bool ref_found = false;
    for (std::size_t r : refs) {
      const auto& ref = emb.entries[r];
      if (within_class_only && ref.drum_type != q.drum_type) continue;
      cands.push_back({euclidean(z[i], z[r]), &ref.id});
      if (ref.id == q.reference_id) ref_found = true;
    }
    if (!ref_found) {
      res.warnings.push_back("imitation '" + q.id + "': reference '" + q.reference_id +
                             "' has no embedding; excluded");
      continue;
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.d != b.d) return a.d < b.d;
      return *a.id < *b.id;
    });
    int rank = 0;
    for (std::size_t c = 0; c < cands.size(); ++c)
      if (*cands[c].id == q.reference_id) {
        rank = static_cast<int>(c) + 1;
        break;
      }
    rr_by_imitator[q.imitator_id].push_back(1.0 / rank);
    ++res.n_queries;
  }
  if (rr_by_imitator.empty()) throw ValidationError("mrr: no usable imitation queries");

  double overall = 0.0;
  for (const auto& [imitator, rrs] : rr_by_imitator) {
    const double m = mean_of(rrs);
    res.per_imitator[imitator] = m;
    overall += m;
  }
  res.overall_percent = 100.0 * overall / static_cast<double>(rr_by_imitator.size());
  return res;
}

// --- Mantel ------------------------------------------------------------------------

namespace {

void check_dist_matrix(const DistMatrix& d, const char* name) {
  if (d.n < 3) throw ValidationError(std::string("mantel_test: ") + name + " must be at least 3x3");
  if (d.a.size() != static_cast<std::size_t>(d.n) * d.n)
    throw ValidationError(std::string("mantel_test: ") + name + " storage size mismatch");
  for (int i = 0; i < d.n; ++i) {
    if (std::abs(d.at(i, i)) > 1e-9)
      throw ValidationError(std::string("mantel_test: ") + name + " has a nonzero diagonal");
    for (int j = i + 1; j < d.n; ++j)
      if (std::abs(d.at(i, j) - d.at(j, i)) > 1e-9)
        throw ValidationError(std::string("mantel_test: ") + name + " is not symmetric");
  }
}

std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

MantelResult mantel_test(const DistMatrix& d1, const DistMatrix& d2, int n_perm, std::uint64_t seed) {
  check_dist_matrix(d1, "D1");
  check_dist_matrix(d2, "D2");
  if (d1.n != d2.n) throw ValidationError("mantel_test: size mismatch");
  if (n_perm < 1) throw ValidationError("mantel_test: n_perm must be >= 1");
  const int n = d1.n;
  const int m = n * (n - 1) / 2;

  // z-score both triangles; the triangle multiset is permutation-invariant,
  // so r_pi reduces to a mean of products.
  std::vector<double> t1(m), t2(m);
  {
    int e = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        t1[e] = d1.at(i, j);
        t2[e] = d2.at(i, j);
      }
  }
  MantelResult res;
  res.n_perm = n_perm;
  const double s1 = population_sd(t1), s2 = population_sd(t2);
  if (s1 <= 1e-15 || s2 <= 1e-15) {
    res.degenerate = true;
    res.r = 0.0;
    res.p = 1.0;
    return res;
  }
  const double m1 = mean_of(t1), m2 = mean_of(t2);
  for (auto& v : t1) v = (v - m1) / s1;
  for (auto& v : t2) v = (v - m2) / s2;

  // z-scored copy of D2 for permuted lookups
  DistMatrix z2(n);
  {
    int e = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        z2.at(i, j) = t2[e];
        z2.at(j, i) = t2[e];
      }
  }

  auto r_for = [&](const std::vector<int>& perm) {
    double acc = 0.0;
    int e = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++e) acc += t1[e] * z2.at(perm[i], perm[j]);
    return acc / m;
  };

  std::vector<int> ident(n);
  std::iota(ident.begin(), ident.end(), 0);
  res.r = r_for(ident);

  const bool exhaustive = n <= 7 || factorial(n) <= static_cast<std::int64_t>(n_perm);
  res.exhaustive = exhaustive;
  const double tol = 1e-12;
  if (exhaustive) {
    std::vector<int> perm = ident;
    std::int64_t count = 0, total = 0;
    do {
      if (r_for(perm) >= res.r - tol) ++count;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    res.p = static_cast<double>(count) / static_cast<double>(total);
    res.n_perm = static_cast<int>(total);
  } else {
    Rng rng(seed);
    std::vector<int> perm = ident;
    std::int64_t count = 0;
    for (int it = 0; it < n_perm; ++it) {
      rng.shuffle(perm);
      if (r_for(perm) >= res.r - tol) ++count;
    }
    res.p = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
  }
  return res;
}

// --- MSS ---------------------------------------------------------------------------

MssResult mss(const EmbeddingSet& emb, int n_runs, int n_perm, std::uint64_t seed) {
  if (n_runs < 1) throw ValidationError("mss: n_runs must be >= 1");
  MssResult res;
  res.features = emb.feature_names;

  // references sorted by id
  std::vector<const EmbeddingSet::Entry*> refs;
  for (const auto& e : emb.entries)
    if (e.sound_type == dataio::SoundType::drum) refs.push_back(&e);
  std::sort(refs.begin(), refs.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });
  const int nr = static_cast<int>(refs.size());
  if (nr < 3) throw ValidationError("mss: need at least 3 reference drums");
  std::unordered_map<std::string, int> ref_slot;
  for (int i = 0; i < nr; ++i) ref_slot[refs[i]->id] = i;

  // one imitation per (imitator, reference); imitators with gaps are skipped
  std::map<std::string, std::vector<const EmbeddingSet::Entry*>> by_imitator;
  for (const auto& e : emb.entries) {
    if (e.sound_type != dataio::SoundType::imitation || e.reference_id.empty()) continue;
    auto it = ref_slot.find(e.reference_id);
    if (it == ref_slot.end()) continue;
    auto& slots = by_imitator[e.imitator_id];
    if (slots.empty()) slots.assign(nr, nullptr);
    if (slots[it->second]) {
      res.warnings.push_back("imitator '" + e.imitator_id + "' has multiple imitations of '" +
                             e.reference_id + "'; keeping the first");
      continue;
    }
    slots[it->second] = &e;
  }
  for (auto it = by_imitator.begin(); it != by_imitator.end();) {
    const bool complete =
        std::all_of(it->second.begin(), it->second.end(), [](const auto* p) { return p != nullptr; });
    if (!complete) {
      res.warnings.push_back("imitator '" + it->first + "' misses imitations for some references; skipped");
      it = by_imitator.erase(it);
    } else {
      ++it;
    }
  }
  if (by_imitator.empty()) throw ValidationError("mss: no imitator with a complete imitation set");
  for (const auto& [imitator, slots] : by_imitator) {
    (void)slots;
    res.imitators.push_back(imitator);
  }

  const int nf = emb.dim();
  const int ni = static_cast<int>(res.imitators.size());
  res.pvals.assign(static_cast<std::size_t>(nf) * ni, 1.0);
  res.pvals_aggregated.assign(nf, 1.0);

  auto run_seed = [&](int f, int imit, int run) {
    return splitmix64(seed ^ (static_cast<std::uint64_t>(f) << 40) ^
                      (static_cast<std::uint64_t>(imit + 1) << 20) ^ static_cast<std::uint64_t>(run));
  };

  int sig_cells = 0, sig_features = 0;
  for (int f = 0; f < nf; ++f) {
    DistMatrix d_ref(nr);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nr; ++j) {
        const double d = refs[i]->values[f] - refs[j]->values[f];
        d_ref.at(i, j) = d * d;
      }

    DistMatrix d_sum(nr);
    for (int im = 0; im < ni; ++im) {
      const auto& slots = by_imitator[res.imitators[im]];
      DistMatrix d_imi(nr);
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nr; ++j) {
          const double d = slots[i]->values[f] - slots[j]->values[f];
          d_imi.at(i, j) = d * d;
          d_sum.at(i, j) += d * d;
        }
      double p_acc = 0.0;
      for (int run = 0; run < n_runs; ++run)
        p_acc += mantel_test(d_ref, d_imi, n_perm, run_seed(f, im, run)).p;
      const double p = p_acc / n_runs;
      res.pvals[static_cast<std::size_t>(f) * ni + im] = p;
      if (p < 0.05) ++sig_cells;
    }

    double p_acc = 0.0;
    for (int run = 0; run < n_runs; ++run)
      p_acc += mantel_test(d_ref, d_sum, n_perm, run_seed(f, -1, run)).p;
    res.pvals_aggregated[f] = p_acc / n_runs;
    if (res.pvals_aggregated[f] < 0.05) ++sig_features;
  }

  res.mss_percent = 100.0 * sig_cells / static_cast<double>(nf * ni);
  res.mss_aggregated_percent = 100.0 * sig_features / static_cast<double>(nf);
  return res;
}

void write_heatmap_csv(const std::string& path, const MssResult& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"feature"};
  header.insert(header.end(), r.imitators.begin(), r.imitators.end());
  rows.push_back(header);
  for (std::size_t f = 0; f < r.features.size(); ++f) {
    std::vector<std::string> row = {r.features[f]};
    for (std::size_t i = 0; i < r.imitators.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", r.pval(static_cast<int>(f), static_cast<int>(i)));
      row.push_back(buf);
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, rows);
}

void write_heatmap_svg(const std::string& path, const MssResult& r) {
  const int cell = 18, left = 90, top = 60, legend = 40;
  const int nf = static_cast<int>(r.features.size());
  const int ni = static_cast<int>(r.imitators.size());
  const int width = left + ni * cell + 20;
  const int height = top + nf * cell + legend;

  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  os << "<text x=\"" << left << "\" y=\"14\" font-size=\"12\">Mantel test p-values per feature and "
        "imitator</text>\n";
  for (int i = 0; i < ni; ++i) {
    os << "<text x=\"" << left + i * cell + cell / 2 << "\" y=\"" << top - 6
       << "\" text-anchor=\"middle\" transform=\"rotate(-45 " << left + i * cell + cell / 2 << " "
       << top - 6 << ")\">" << r.imitators[i] << "</text>\n";
  }
  for (int f = 0; f < nf; ++f) {
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + f * cell + cell - 5
       << "\" text-anchor=\"end\">" << r.features[f] << "</text>\n";
    for (int i = 0; i < ni; ++i) {
      const double p = std::clamp(r.pval(f, i), 0.0, 1.0);
      // low p = saturated red, high p = white; power stretch emphasizes the
      // significant end
      const int shade = static_cast<int>(255 * std::pow(p, 0.4));
      os << "<rect x=\"" << left + i * cell << "\" y=\"" << top + f * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(255," << shade << "," << shade
         << ")\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
    }
  }
  os << "<text x=\"" << left << "\" y=\"" << top + nf * cell + 24
     << "\">dark = low p (feature imitated faithfully), light = high p</text>\n";
  os << "</svg>\n";
}

// --- OLS slope CI ---------------------------------------------------------------------

SlopeCi ols_slope_ci(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ValidationError("ols_slope_ci: length mismatch");
  if (n < 3) throw ValidationError("ols_slope_ci: need at least 3 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 1e-14) throw ValidationError("ols_slope_ci: zero variance in x");
  SlopeCi out;
  out.slope = sxy / sxx;
  const double intercept = my - out.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (intercept + out.slope * x[i]);
    sse += r * r;
  }
  const double df = static_cast<double>(n - 2);
  const double se = std::sqrt(std::max(sse, 0.0) / df / sxx);
  const double tq = boost::math::quantile(boost::math::students_t(df), 0.975);
  out.lower95 = out.slope - tq * se;
  out.upper95 = out.slope + tq * se;
  return out;
}

// --- perception distances / accuracy ------------------------------------------------------

namespace {
int class_key(dataio::DrumType t) {
  switch (t) {
    case dataio::DrumType::kick: return 0;
    case dataio::DrumType::snare: return 1;
    case dataio::DrumType::hh_closed:
    case dataio::DrumType::hh_open: return 2;  // hi-hats form one rating class
  }
  return -1;
}
}  // namespace

PerceptionDistances within_class_distances(const EmbeddingSet& emb) {
  PerceptionDistances out;
  std::vector<std::vector<double>> rows;
  for (const auto& e : emb.entries) rows.push_back(e.values);
  const auto z = standardize_columns(rows);

  for (std::size_t i = 0; i < emb.entries.size(); ++i) {
    const auto& imi = emb.entries[i];
    if (imi.sound_type != dataio::SoundType::imitation) continue;
    for (std::size_t r = 0; r < emb.entries.size(); ++r) {
      const auto& ref = emb.entries[r];
      if (ref.sound_type != dataio::SoundType::drum) continue;
      if (class_key(ref.drum_type) != class_key(imi.drum_type)) continue;
      out.distance[{imi.id, ref.id}] = euclidean(z[i], z[r]);
      ++out.n_pairs;
    }
  }
  return out;
}

SlopeAccuracyResult slope_accuracy(const EmbeddingSet& emb, const dataio::RatingsTable& ratings) {
  SlopeAccuracyResult res;
  const auto dist = within_class_distances(emb);
  res.n_pairs = dist.n_pairs;

  struct RegData {
    std::vector<double> x, y;
    std::set<std::string> imitations;
  };
  std::map<std::string, RegData> by_sound;
  for (const auto& row : ratings.rows) {
    auto it = dist.distance.find({row.imitation_id, row.reference_id});
    if (it == dist.distance.end())
      throw ValidationError("slope_accuracy: no within-class distance for pair ('" + row.imitation_id +
                            "','" + row.reference_id + "')");
    auto& rd = by_sound[row.reference_id];
    rd.x.push_back(it->second);
    rd.y.push_back(row.rating);
    rd.imitations.insert(row.imitation_id);
  }
  if (by_sound.empty()) throw ValidationError("slope_accuracy: no ratings");

  int hits = 0;
  for (const auto& [sound, rd] : by_sound) {
    if (rd.imitations.size() < 3) {
      res.warnings.push_back("sound '" + sound + "' has fewer than 3 rated pairs; excluded");
      ++res.n_excluded;
      continue;
    }
    SlopeCi ci;
    try {
      ci = ols_slope_ci(rd.x, rd.y);
    } catch (const ValidationError& e) {
      res.warnings.push_back("sound '" + sound + "': " + e.what() + "; excluded");
      ++res.n_excluded;
      continue;
    }
    ++res.n_regressions;
    if (ci.upper95 < 0.0) ++hits;
  }
  if (res.n_regressions == 0) throw ValidationError("slope_accuracy: no sound had enough rated pairs");
  res.percent = 100.0 * hits / static_cast<double>(res.n_regressions);
  return res;
}

// --- aggregation / screening -----------------------------------------------------------

Aggregate aggregate_runs(const std::vector<double>& values) {
  if (values.size() < 2) throw ValidationError("aggregate_runs: need at least 2 values");
  Aggregate a;
  a.mean = mean_of(values);
  a.ci95 = 1.96 * sample_sd(values) / std::sqrt(static_cast<double>(values.size()));
  return a;
}

bool delta_aic_decisive(double aic_a, double aic_b) { return std::abs(aic_a - aic_b) > 10.0; }

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: need two equal-length vectors");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da <= 1e-15 || db <= 1e-15) return 0.0;
  return num / std::sqrt(da * db);
}

std::vector<std::string> reliable_listeners(const dataio::RatingsTable& ratings, double rho_min) {
  // listener -> trial -> (reference -> rating, imitation)
  struct Trial {
    std::string imitation;
    std::map<std::string, double> by_ref;
  };
  std::map<std::string, std::map<std::string, Trial>> listeners;
  for (const auto& row : ratings.rows) {
    auto& t = listeners[row.listener_id][row.trial_id];
    t.imitation = row.imitation_id;
    t.by_ref[row.reference_id] = row.rating;
  }

  std::vector<std::string> kept;
  for (const auto& [listener, trials] : listeners) {
    // group trials presenting the same page: same imitation and reference set
    std::map<std::string, std::vector<const Trial*>> pages;
    for (const auto& [tid, trial] : trials) {
      (void)tid;
      std::string sig = trial.imitation;
      for (const auto& [ref, rating] : trial.by_ref) {
        (void)rating;
        sig += "|" + ref;
      }
      pages[sig].push_back(&trial);
    }
    bool reliable = false;
    for (const auto& [sig, group] : pages) {
      (void)sig;
      for (std::size_t i = 0; i < group.size() && !reliable; ++i) {
        for (std::size_t j = i + 1; j < group.size() && !reliable; ++j) {
          std::vector<double> a, b;
          for (const auto& [ref, rating] : group[i]->by_ref) {
            a.push_back(rating);
            b.push_back(group[j]->by_ref.at(ref));
          }
          if (a.size() >= 2 && spearman(a, b) >= rho_min) reliable = true;
        }
      }
    }
    if (reliable) kept.push_back(listener);
  }
  return kept;
}

// --- report -----------------------------------------------------------------------------

void MetricReport::summarize() {
  auto fill = [&](auto getter, std::optional<Aggregate>& out) {
    std::vector<double> vals;
    for (const auto& r : per_run) {
      const auto& v = getter(r);
      if (v) vals.push_back(*v);
    }
    if (vals.size() >= 2) out = aggregate_runs(vals);
    else out = std::nullopt;
  };
  fill([](const RunMetrics& r) -> const std::optional<double>& { return r.mrr; }, mrr_summary);
  fill([](const RunMetrics& r) -> const std::optional<double>& { return r.mss; }, mss_summary);
  fill([](const RunMetrics& r) -> const std::optional<double>& { return r.accuracy; }, accuracy_summary);
  fill([](const RunMetrics& r) -> const std::optional<double>& { return r.aic; }, aic_summary);
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["n_runs"] = per_run.size();
  nlohmann::json runs = nlohmann::json::array();
  auto put = [](nlohmann::json& o, const char* key, const std::optional<double>& v) {
    if (v) o[key] = *v;
    else o[key] = nullptr;
  };
  for (const auto& r : per_run) {
    nlohmann::json o;
    o["label"] = r.label;
    put(o, "mrr", r.mrr);
    put(o, "mss", r.mss);
    put(o, "accuracy", r.accuracy);
    put(o, "aic", r.aic);
    runs.push_back(o);
  }
  j["per_run"] = runs;
  nlohmann::json summary = nlohmann::json::object();
  auto put_agg = [&](const char* key, const std::optional<Aggregate>& a) {
    if (a) summary[key] = {{"mean", a->mean}, {"ci95", a->ci95}};
  };
  put_agg("mrr", mrr_summary);
  put_agg("mss", mss_summary);
  put_agg("accuracy", accuracy_summary);
  put_agg("aic", aic_summary);
  j["summary"] = summary;
  j["notes"] = notes;
  return j.dump(2);
}

}  // namespace vimp::metrics
