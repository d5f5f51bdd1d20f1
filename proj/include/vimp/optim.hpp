#pragma once

#include <vector>

#include "vimp/tensor.hpp"

namespace vimp::nn {

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moment state.
template <typename Real>
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<Tensor<Real>> m, v;

  void init(const std::vector<Tensor<Real>>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.shape);
      v.emplace_back(p.shape);
    }
  }
};

// One Adam update over a parameter list. grads[i] matches params[i].
template <typename Real>
void adam_step(std::vector<Tensor<Real>*> params, const std::vector<const Tensor<Real>*>& grads,
               AdamState<Real>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ValidationError("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<Real>& theta = *params[p];
    const Tensor<Real>& g = *grads[p];
    if (!same_shape(theta, g) || !same_shape(theta, state.m[p]))
      throw ValidationError("adam_step: shape mismatch at parameter " + std::to_string(p));
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::int64_t i = 0; i < theta.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      theta[i] = static_cast<Real>(static_cast<double>(theta[i]) -
                                   state.hyper.alpha * mhat / (std::sqrt(vhat) + state.hyper.eps));
    }
  }
}

// Early stopping at 10 stale epochs, learning-rate cut by 0.2 at every 5.
struct TrainSchedule {
  int early_stop_patience = 10;
  int plateau_patience = 5;
  double plateau_factor = 0.2;
  int max_epochs = 200;
  double initial_lr = 1e-3;

  void validate() const {
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
      throw ConfigError("plateau_factor must be in (0,1)");
    if (early_stop_patience < 1 || plateau_patience < 1) throw ConfigError("patiences must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  }
};

struct ScheduleDecision {
  double new_lr = 0.0;
  bool stop = false;
};

// history holds validation losses up to the current epoch. "Decreased" means
// strictly below the best seen so far.
inline ScheduleDecision schedule_update(const std::vector<double>& history, const TrainSchedule& sched,
                                        double lr) {
  if (history.empty()) throw ValidationError("schedule_update: empty history");
  sched.validate();
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i] < history[best]) best = i;
  const int stale = static_cast<int>(history.size() - 1 - best);
  ScheduleDecision d;
  d.stop = stale >= sched.early_stop_patience;
  d.new_lr = (stale > 0 && stale % sched.plateau_patience == 0) ? lr * sched.plateau_factor : lr;
  return d;
}

}  // namespace vimp::nn
