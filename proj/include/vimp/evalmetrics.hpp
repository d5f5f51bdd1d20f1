#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vimp/dataio.hpp"
#include "vimp/heurfeat.hpp"

namespace vimp::metrics {

// Embeddings joined with manifest metadata.
struct EmbeddingSet {
  struct Entry {
    std::string id;
    std::vector<double> values;
    dataio::SoundType sound_type = dataio::SoundType::drum;
    dataio::DrumType drum_type = dataio::DrumType::kick;
    std::string imitator_id;
    std::string reference_id;
  };

  std::vector<std::string> feature_names;
  std::vector<Entry> entries;

  int dim() const { return static_cast<int>(feature_names.size()); }
  const Entry* find(const std::string& id) const;

  // Joins a feature table with the manifest; every row id must resolve.
  // evaluation_only keeps only evaluation-split records.
  static EmbeddingSet from(const dataio::DatasetManifest& manifest, const heurfeat::FeatureTable& table,
                           bool evaluation_only = true);
};

// z-scores each column over all rows; constant columns are zeroed, which
// drops them from every Euclidean distance.
std::vector<std::vector<double>> standardize_columns(const std::vector<std::vector<double>>& rows);

double euclidean(const std::vector<double>& a, const std::vector<double>& b);

// --- MRR --------------------------------------------------------------------------

struct MrrResult {
  std::map<std::string, double> per_imitator;  // mean reciprocal rank in [0,1]
  double overall_percent = 0.0;
  int n_queries = 0;
  std::vector<std::string> warnings;
};

// Ranks every reference drum per imitation by ascending Euclidean distance
// over jointly z-scored features; ties break by sound id. within_class_only
// restricts candidates to the query's drum type.
MrrResult mrr(const EmbeddingSet& emb, bool within_class_only = false);

// --- Mantel test -------------------------------------------------------------------

struct DistMatrix {
  int n = 0;
  std::vector<double> a;

  DistMatrix() = default;
  explicit DistMatrix(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

struct MantelResult {
  double r = 0.0;
  double p = 1.0;
  int n_perm = 0;
  bool degenerate = false;
  bool exhaustive = false;
};

// One-sided (positive) permutation test of the Pearson correlation between
// the upper triangles. Exhaustive when n <= 7 or n! <= n_perm; otherwise
// p = (1 + #{r_pi >= r}) / (n_perm + 1).
MantelResult mantel_test(const DistMatrix& d1, const DistMatrix& d2, int n_perm, std::uint64_t seed);

// --- Mantel Score Significance -------------------------------------------------------

struct MssResult {
  std::vector<std::string> features;
  std::vector<std::string> imitators;
  std::vector<double> pvals;  // features x imitators, run-averaged
  double mss_percent = 0.0;   // per-imitator form

  // Aggregated form: imitation matrix summed over imitators, one test per
  // feature.
  std::vector<double> pvals_aggregated;
  double mss_aggregated_percent = 0.0;

  std::vector<std::string> warnings;

  double pval(int feature, int imitator) const {
    return pvals[static_cast<std::size_t>(feature) * imitators.size() + imitator];
  }
};

// Squared-difference distance matrices per scalar feature (references) vs per
// feature and imitator (imitations); p-values averaged over n_runs
// permutation re-seedings; a cell counts when its averaged p < 0.05.
MssResult mss(const EmbeddingSet& emb, int n_runs = 5, int n_perm = 999, std::uint64_t seed = 1);

void write_heatmap_csv(const std::string& path, const MssResult& r);
void write_heatmap_svg(const std::string& path, const MssResult& r);

// --- perception metrics ---------------------------------------------------------------

struct SlopeCi {
  double slope = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
};

// Least-squares slope with a t-based 95% CI (n-2 df).
SlopeCi ols_slope_ci(const std::vector<double>& x, const std::vector<double>& y);

// Within-class (kick / snare / hi-hat) imitation-to-reference distances over
// jointly z-scored features.
struct PerceptionDistances {
  std::map<std::pair<std::string, std::string>, double> distance;  // (imitation, reference)
  std::size_t n_pairs = 0;
};
PerceptionDistances within_class_distances(const EmbeddingSet& emb);

struct SlopeAccuracyResult {
  double percent = 0.0;
  int n_regressions = 0;  // performed (>= 3 rated pairs, non-degenerate)
  int n_excluded = 0;
  std::size_t n_pairs = 0;  // within-class pairs available in the geometry
  std::vector<std::string> warnings;
};

// One regression rating ~ distance per imitated reference sound, pooling all
// listeners; accuracy is the share of sounds with upper95 < 0.
SlopeAccuracyResult slope_accuracy(const EmbeddingSet& emb, const dataio::RatingsTable& ratings);

struct LmmFit {
  std::vector<std::string> fixed_names;
  std::vector<double> fixed_effects;
  double var_listener = 0.0;
  double var_trial_in_listener = 0.0;
  double var_imitator = 0.0;
  double var_residual = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  int k = 0;  // fixed effects + 3 variance components + residual variance
  int n_obs = 0;
  int n_evals = 0;
};

// Gaussian LMM  rating ~ distance * sound + (1|listener/trial) + (1|imitator),
// maximum likelihood via the profiled deviance over the three relative
// standard deviations (sparse-Cholesky inner solve, Nelder-Mead outer loop).
// theta_fixed pins the relative SDs instead of optimizing (diagnostics).
LmmFit fit_lmm(const dataio::RatingsTable& ratings,
               const std::map<std::pair<std::string, std::string>, double>& distance,
               const std::unordered_map<std::string, std::string>& imitator_of,
               const std::optional<std::array<double, 3>>& theta_fixed = std::nullopt);

// --- aggregation / listener screening -----------------------------------------------

struct Aggregate {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * sample sd / sqrt(n)
};

Aggregate aggregate_runs(const std::vector<double>& values);

// Two models differ decisively when |AIC difference| > 10.
bool delta_aic_decisive(double aic_a, double aic_b);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Keeps exactly the listeners that replicate at least one duplicate trial
// (same imitation and reference set) with rho >= rho_min. Listeners without
// duplicate trials are dropped.
std::vector<std::string> reliable_listeners(const dataio::RatingsTable& ratings, double rho_min = 0.5);

// --- report -----------------------------------------------------------------------------

struct RunMetrics {
  std::string label;
  std::optional<double> mrr;
  std::optional<double> mss;
  std::optional<double> accuracy;
  std::optional<double> aic;
};

struct MetricReport {
  std::vector<RunMetrics> per_run;
  std::optional<Aggregate> mrr_summary, mss_summary, accuracy_summary, aic_summary;
  std::vector<std::string> notes;

  void summarize();  // fills summaries for metrics present in >= 2 runs
  std::string to_json() const;
};

}  // namespace vimp::metrics
