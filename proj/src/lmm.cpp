#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "vimp/evalmetrics.hpp"

namespace vimp::metrics {

namespace {

struct LmmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  // group index per observation, one column per random-effect term
  std::vector<int> g_listener, g_trial, g_imitator;
  int q1 = 0, q2 = 0, q3 = 0;
  std::vector<std::string> fixed_names;
};

LmmData assemble(const dataio::RatingsTable& ratings,
                 const std::map<std::pair<std::string, std::string>, double>& distance,
                 const std::unordered_map<std::string, std::string>& imitator_of) {
  if (ratings.rows.empty()) throw ValidationError("fit_lmm: empty ratings table");
  LmmData d;
  const std::size_t n = ratings.rows.size();

  std::vector<double> dist(n);
  std::vector<std::string> sound(n), listener(n), trial(n), imitator(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ratings.rows[i];
    auto it = distance.find({r.imitation_id, r.reference_id});
    if (it == distance.end())
      throw ValidationError("fit_lmm: no distance for pair ('" + r.imitation_id + "','" +
                            r.reference_id + "')");
    dist[i] = it->second;
    sound[i] = r.reference_id;
    listener[i] = r.listener_id;
    trial[i] = r.listener_id + "\x1f" + r.trial_id;  // trial nested in listener
    auto im = imitator_of.find(r.imitation_id);
    if (im == imitator_of.end())
      throw ValidationError("fit_lmm: unknown imitator for imitation '" + r.imitation_id + "'");
    imitator[i] = im->second;
  }

  auto index_levels = [](const std::vector<std::string>& keys, std::vector<int>& out) {
    std::map<std::string, int> levels;
    for (const auto& k : keys) levels.emplace(k, 0);
    int next = 0;
    for (auto& [k, v] : levels) v = next++;
    out.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = levels[keys[i]];
    return static_cast<int>(levels.size());
  };
  d.q1 = index_levels(listener, d.g_listener);
  d.q2 = index_levels(trial, d.g_trial);
  d.q3 = index_levels(imitator, d.g_imitator);
  if (d.q1 < 2 || d.q3 < 2)
    throw ValidationError("fit_lmm: each random-effect grouping needs at least 2 levels");

  std::vector<int> g_sound;
  std::vector<std::string> sound_levels;
  {
    std::set<std::string> s(sound.begin(), sound.end());
    sound_levels.assign(s.begin(), s.end());
  }
  std::map<std::string, int> sound_idx;
  for (std::size_t i = 0; i < sound_levels.size(); ++i) sound_idx[sound_levels[i]] = static_cast<int>(i);
  const int ls = static_cast<int>(sound_levels.size());

  // rating ~ distance * sound: intercept, distance, sound dummies (treatment
  // coding), distance x sound interactions
  const int p = 2 + 2 * (ls - 1);
  d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
  d.y.resize(static_cast<Eigen::Index>(n));
  d.fixed_names = {"(Intercept)", "distance"};
  for (int s = 1; s < ls; ++s) d.fixed_names.push_back("sound[" + sound_levels[s] + "]");
  for (int s = 1; s < ls; ++s) d.fixed_names.push_back("distance:sound[" + sound_levels[s] + "]");

  for (std::size_t i = 0; i < n; ++i) {
    const auto ei = static_cast<Eigen::Index>(i);
    d.y(ei) = ratings.rows[i].rating;
    d.X(ei, 0) = 1.0;
    d.X(ei, 1) = dist[i];
    const int s = sound_idx[sound[i]];
    if (s > 0) {
      d.X(ei, 1 + s) = 1.0;
      d.X(ei, 1 + (ls - 1) + s) = dist[i];
    }
  }
  if (static_cast<int>(n) <= p + 4)
    throw ValidationError("fit_lmm: too few observations for the fixed-effects design");
  return d;
}

struct DevianceResult {
  double deviance = 0.0;
  double r2 = 0.0;
  double logdet = 0.0;
  Eigen::VectorXd beta;
};

// lme4-style profiled ML deviance: d(theta) = log|L|^2 + n(1 + log(2 pi r^2/n)).
DevianceResult profiled_deviance(const LmmData& d, const std::array<double, 3>& theta_in) {
  const Eigen::Index n = d.y.size();
  const int q = d.q1 + d.q2 + d.q3;
  const int p = static_cast<int>(d.X.cols());
  std::array<double, 3> th = theta_in;
  for (auto& t : th) t = std::max(t, 0.0);

  // U = Z Lambda: three scaled indicator blocks per row
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, d.g_listener[i], th[0]);
    trip.emplace_back(i, d.q1 + d.g_trial[i], th[1]);
    trip.emplace_back(i, d.q1 + d.q2 + d.g_imitator[i], th[2]);
  }
  Eigen::SparseMatrix<double> U(n, q);
  U.setFromTriplets(trip.begin(), trip.end());

  Eigen::SparseMatrix<double> A = Eigen::SparseMatrix<double>(U.transpose() * U);
  for (int i = 0; i < q; ++i) A.coeffRef(i, i) += 1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(A);
  if (chol.info() != Eigen::Success) throw FitError("fit_lmm: sparse Cholesky failed");

  const Eigen::MatrixXd CX = U.transpose() * d.X;     // q x p
  const Eigen::VectorXd cu = U.transpose() * d.y;     // q
  const Eigen::MatrixXd AinvCX = chol.solve(CX);      // q x p
  const Eigen::VectorXd Ainvcu = chol.solve(cu);      // q

  const Eigen::MatrixXd S = d.X.transpose() * d.X - CX.transpose() * AinvCX;
  const Eigen::VectorXd sy = d.X.transpose() * d.y - CX.transpose() * Ainvcu;
  Eigen::LDLT<Eigen::MatrixXd> sll(S);
  if (sll.info() != Eigen::Success) throw FitError("fit_lmm: fixed-effects solve failed");
  DevianceResult out;
  out.beta = sll.solve(sy);
  const Eigen::VectorXd u = Ainvcu - AinvCX * out.beta;
  const Eigen::VectorXd resid = d.y - d.X * out.beta - U * u;
  out.r2 = resid.squaredNorm() + u.squaredNorm();

  out.logdet = 0.0;
  const auto& D = chol.vectorD();
  for (int i = 0; i < q; ++i) out.logdet += std::log(D(i));

  const double dn = static_cast<double>(n);
  out.deviance = out.logdet + dn * (1.0 + std::log(2.0 * M_PI * out.r2 / dn));
  (void)p;
  return out;
}

// Derivative-free Nelder-Mead over the three relative SDs.
struct SimplexResult {
  std::array<double, 3> x{};
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

SimplexResult nelder_mead(const std::function<double(const std::array<double, 3>&)>& fn,
                          std::array<double, 3> x0, double rel_tol, int max_iter) {
  constexpr int dim = 3;
  std::array<std::array<double, 3>, dim + 1> xs;
  std::array<double, dim + 1> fs;
  int evals = 0;
  auto eval = [&](const std::array<double, 3>& x) {
    ++evals;
    return fn(x);
  };

  xs[0] = x0;
  fs[0] = eval(x0);
  for (int i = 0; i < dim; ++i) {
    auto x = x0;
    x[i] += x[i] != 0.0 ? 0.25 * std::abs(x[i]) : 0.25;
    xs[i + 1] = x;
    fs[i + 1] = eval(x);
  }

  auto order = [&] {
    std::array<int, dim + 1> idx{0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::array<std::array<double, 3>, dim + 1> xs2;
    std::array<double, dim + 1> fs2;
    for (int i = 0; i <= dim; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs = xs2;
    fs = fs2;
  };

  SimplexResult res;
  for (int it = 0; it < max_iter; ++it) {
    order();
    if (std::abs(fs[dim] - fs[0]) <= rel_tol * (std::abs(fs[0]) + rel_tol)) {
      res.converged = true;
      break;
    }
    std::array<double, 3> centroid{};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < 3; ++j) centroid[j] += xs[i][j] / dim;

    auto blend = [&](double t) {
      std::array<double, 3> x;
      for (int j = 0; j < 3; ++j) x[j] = centroid[j] + t * (xs[dim][j] - centroid[j]);
      return x;
    };
    const auto xr = blend(-1.0);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const auto xe = blend(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[dim] = xe;
        fs[dim] = fe;
      } else {
        xs[dim] = xr;
        fs[dim] = fr;
      }
    } else if (fr < fs[dim - 1]) {
      xs[dim] = xr;
      fs[dim] = fr;
    } else {
      const bool outside = fr < fs[dim];
      const auto xc = blend(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[dim])) {
        xs[dim] = xc;
        fs[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          for (int j = 0; j < 3; ++j) xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }
  order();
  res.x = xs[0];
  res.f = fs[0];
  res.evals = evals;
  return res;
}

}  // namespace

LmmFit fit_lmm(const dataio::RatingsTable& ratings,
               const std::map<std::pair<std::string, std::string>, double>& distance,
               const std::unordered_map<std::string, std::string>& imitator_of,
               const std::optional<std::array<double, 3>>& theta_fixed) {
  const LmmData data = assemble(ratings, distance, imitator_of);

  std::array<double, 3> theta{1.0, 1.0, 1.0};
  int evals = 0;
  if (theta_fixed) {
    theta = *theta_fixed;
    for (auto& t : theta) t = std::max(t, 0.0);
    evals = 1;
  } else {
    auto objective = [&](const std::array<double, 3>& th) { return profiled_deviance(data, th).deviance; };
    const auto sol = nelder_mead(objective, theta, 1e-8, 2000);
    if (!sol.converged)
      throw FitError("fit_lmm: simplex did not converge after 2000 iterations (deviance " +
                     std::to_string(sol.f) + ", theta " + std::to_string(sol.x[0]) + "," +
                     std::to_string(sol.x[1]) + "," + std::to_string(sol.x[2]) + ")");
    theta = sol.x;
    for (auto& t : theta) t = std::max(t, 0.0);
    evals = sol.evals;
  }

  const auto dev = profiled_deviance(data, theta);
  LmmFit fit;
  fit.fixed_names = data.fixed_names;
  fit.fixed_effects.assign(dev.beta.data(), dev.beta.data() + dev.beta.size());
  const double n = static_cast<double>(data.y.size());
  fit.var_residual = dev.r2 / n;
  fit.var_listener = theta[0] * theta[0] * fit.var_residual;
  fit.var_trial_in_listener = theta[1] * theta[1] * fit.var_residual;
  fit.var_imitator = theta[2] * theta[2] * fit.var_residual;
  fit.loglik = -0.5 * dev.deviance;
  fit.k = static_cast<int>(data.X.cols()) + 3 + 1;
  fit.aic = 2.0 * fit.k - 2.0 * fit.loglik;
  fit.n_obs = static_cast<int>(data.y.size());
  fit.n_evals = evals;
  return fit;
}

}  // namespace vimp::metrics
