// Exact recursive filters and predictors for HMC, Sigma_P and Sigma_S
// systems, and the G_x operator.
//
// Notation: x_filt = E[X_t | y_0..y_t], x_pred = E[X_{t+1} | y_0..y_t],
// y_pred = E[Y_{t+1} | y_0..y_t]. Observation symbols are 0-based.
//
// Initial-call conventions:
//   HMC      prior of X_0 is p0                 (hmc_filter_init)
//   Sigma_P  X_0 | y_0 from the y_0 block of q0 (sigma_p_init)
//   Sigma_S  predictor X_{0|-1} = p0            (sigma_s_init)
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hmcfs/models.hpp"

namespace hmcfs {

template <typename T>
struct FilterState {
  std::int64_t t = 0;
  Vec<T> x_filt;
  Vec<T> x_pred;
  Vec<T> y_pred;
  /// P(y_t | y_0..y_{t-1}); exact in rational mode.
  T obs_prob = T(0);
  /// Natural log of obs_prob (-inf after a uniform reset).
  double loglik_inc = 0.0;
  /// Set when the observation was impossible and the uniform-reset policy
  /// replaced the posterior.
  bool reset = false;
};

enum class Route { native, sigma_p, sigma_s };
enum class ImpossiblePolicy { error, uniform_reset };

/// G_x = diag(x) G^T diag(G x)^{-1}. Throws SingularOutputMass when some
/// (G x)_j is zero.
template <typename T>
Mat<T> g_map(const Mat<T>& g, const Vec<T>& x) {
  const Vec<T> gx = g * x;
  for (Eigen::Index j = 0; j < gx.size(); ++j)
    if (gx(j) == T(0)) throw SingularOutputMass(static_cast<int>(j));
  return x.asDiagonal() * g.transpose() * gx.cwiseInverse().asDiagonal();
}

namespace detail {

template <typename T>
double log_of(const T& p) {
  return std::log(scalar_cast<double>(p));
}

inline void require_symbol(int y, Eigen::Index m, std::int64_t t) {
  if (y < 0 || y >= m)
    throw ValidationError("y", std::to_string(t),
                          "symbol " + std::to_string(y + 1) + " outside 1.." + std::to_string(m));
}

/// Bayes correction with a diagonal likelihood: x_i * g(y, i) / (g x)_y.
template <typename T>
Vec<T> correct(const Mat<T>& g, const Vec<T>& prior, int y, std::int64_t t, T* mass) {
  const T denom = g.row(y).dot(prior);
  if (denom == T(0)) throw ImpossibleObservation(t, y);
  if (mass) *mass = denom;
  return prior.cwiseProduct(g.row(y).transpose()) / denom;
}

template <typename T>
Vec<T> uniform(Eigen::Index n) {
  return Vec<T>::Constant(n, T(1) / T(static_cast<int>(n)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hidden Markov chain.

/// X_0 = diag(p0) G^T diag(G p0)^{-1} Y_0.
template <typename T>
FilterState<T> hmc_filter_init(const HmcModel<T>& model, int y0) {
  detail::require_symbol(y0, model.m(), 0);
  FilterState<T> s;
  s.x_filt = detail::correct(model.G(), model.p0(), y0, 0, &s.obs_prob);
  s.x_pred = model.A() * s.x_filt;
  s.y_pred = model.G() * s.x_pred;
  s.loglik_inc = detail::log_of(s.obs_prob);
  return s;
}

/// X_t = diag(A X_{t-1}) G^T diag(G A X_{t-1})^{-1} Y_t, then
/// X_{t+1|t} = A X_t and Y_{t+1|t} = G A X_t.
template <typename T>
FilterState<T> hmc_filter_step(const HmcModel<T>& model, const Vec<T>& x_filt_prev, int y,
                                std::int64_t t) {
  detail::require_symbol(y, model.m(), t);
  FilterState<T> s;
  s.t = t;
  const Vec<T> prior = model.A() * x_filt_prev;
  s.x_filt = detail::correct(model.G(), prior, y, t, &s.obs_prob);
  s.x_pred = model.A() * s.x_filt;
  s.y_pred = model.G() * s.x_pred;
  s.loglik_inc = detail::log_of(s.obs_prob);
  return s;
}

// ---------------------------------------------------------------------------
// Sigma_P.

/// X_0 is the y_0 block of q0, normalized.
template <typename T>
FilterState<T> sigma_p_init(const SigmaPModel<T>& model, int y0) {
  detail::require_symbol(y0, model.m(), 0);
  const auto marg = sigma_p_marginals(model);
  const Vec<T> block = model.q0().segment(y0 * model.n(), model.n());
  FilterState<T> s;
  s.obs_prob = block.sum();
  if (s.obs_prob == T(0)) throw ImpossibleObservation(0, y0);
  s.x_filt = block / s.obs_prob;
  s.x_pred = marg.A * s.x_filt;
  s.y_pred = marg.output * s.x_filt;
  s.loglik_inc = detail::log_of(s.obs_prob);
  return s;
}

/// X_t = [Q_1 X_{t-1}, ..., Q_m X_{t-1}] diag(C X_{t-1})^{-1} Y_t, then
/// X_{t+1|t} = A X_t and Y_{t+1|t} = C X_t.
template <typename T>
FilterState<T> sigma_p_step(const SigmaPModel<T>& model, const Vec<T>& x_filt_prev, int y,
                             std::int64_t t) {
  detail::require_symbol(y, model.m(), t);
  const auto marg = sigma_p_marginals(model);
  const Vec<T> y_mass = marg.output * x_filt_prev;
  FilterState<T> s;
  s.t = t;
  s.obs_prob = y_mass(y);
  if (s.obs_prob == T(0)) throw ImpossibleObservation(t, y);
  s.x_filt = model.block(y) * x_filt_prev / s.obs_prob;
  s.x_pred = marg.A * s.x_filt;
  s.y_pred = marg.output * s.x_filt;
  s.loglik_inc = detail::log_of(s.obs_prob);
  return s;
}

// ---------------------------------------------------------------------------
// Sigma_S.

/// X_{t+1|t} = [R_1 X_{t|t-1}, ..., R_m X_{t|t-1}] diag(G X_{t|t-1})^{-1} Y_t.
template <typename T>
Vec<T> sigma_s_predict_step(const SigmaSModel<T>& model, const Vec<T>& x_pred_prev, int y,
                            std::int64_t t = 0) {
  detail::require_symbol(y, model.m(), t);
  const T denom = (model.block(y) * x_pred_prev).sum();
  if (denom == T(0)) throw ImpossibleObservation(t, y);
  return model.block(y) * x_pred_prev / denom;
}

/// X_t = diag(X_{t|t-1}) G^T diag(G X_{t|t-1})^{-1} Y_t.
template <typename T>
Vec<T> sigma_s_filter(const Mat<T>& g, const Vec<T>& x_pred, int y, std::int64_t t = 0) {
  detail::require_symbol(y, g.rows(), t);
  return detail::correct(g, x_pred, y, t, static_cast<T*>(nullptr));
}

/// One time step of the Sigma_S recursion given X_{t|t-1}; the resulting
/// state carries X_t, X_{t+1|t} and Y_{t+1|t} = G X_{t+1|t}.
template <typename T>
FilterState<T> sigma_s_step(const SigmaSModel<T>& model, const Vec<T>& x_pred_prev, int y,
                             std::int64_t t) {
  detail::require_symbol(y, model.m(), t);
  const Mat<T> g = sigma_s_marginals(model).output;
  FilterState<T> s;
  s.t = t;
  s.x_filt = detail::correct(g, x_pred_prev, y, t, &s.obs_prob);
  s.x_pred = sigma_s_predict_step(model, x_pred_prev, y, t);
  s.y_pred = g * s.x_pred;
  s.loglik_inc = detail::log_of(s.obs_prob);
  return s;
}

template <typename T>
FilterState<T> sigma_s_init(const SigmaSModel<T>& model, int y0) {
  return sigma_s_step(model, model.p0(), y0, 0);
}

// ---------------------------------------------------------------------------
// Drivers.

template <typename T>
struct FilterRun {
  std::vector<FilterState<T>> states;
  /// Product of the obs_prob increments: P(y_0..y_T) when no reset occurred.
  T likelihood = T(1);
  double loglik = 0.0;
};

namespace detail {

template <typename T>
void require_observations(std::span<const int> ys, Eigen::Index m) {
  if (ys.empty()) throw ValidationError("ys", "", "observation sequence is empty");
  for (std::size_t t = 0; t < ys.size(); ++t) require_symbol(ys[t], m, static_cast<std::int64_t>(t));
}

/// Drives a recursion. `advance(prev_state_or_null, y, t)` computes the next
/// state; `reset_state(t)` supplies the uniform-reset replacement.
template <typename T, typename Advance, typename Reset>
FilterRun<T> drive(std::span<const int> ys, ImpossiblePolicy policy, Advance advance, Reset reset_state) {
  FilterRun<T> run;
  run.states.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const auto t = static_cast<std::int64_t>(i);
    const FilterState<T>* prev = run.states.empty() ? nullptr : &run.states.back();
    FilterState<T> s;
    try {
      s = advance(prev, ys[i], t);
    } catch (const ImpossibleObservation&) {
      if (policy == ImpossiblePolicy::error) throw;
      s = reset_state(t);
    }
    run.likelihood *= s.obs_prob;
    run.loglik += s.loglik_inc;
    run.states.push_back(std::move(s));
  }
  return run;
}

template <typename T>
FilterState<T> reset_with(std::int64_t t, const Mat<T>& a, const Mat<T>& out, bool out_of_pred) {
  FilterState<T> s;
  s.t = t;
  s.reset = true;
  s.x_filt = uniform<T>(a.rows());
  s.x_pred = a * s.x_filt;
  s.y_pred = out_of_pred ? Vec<T>(out * s.x_pred) : Vec<T>(out * s.x_filt);
  s.obs_prob = T(0);
  s.loglik_inc = -std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace detail

/// Runs the Sigma_P filter over the whole observation sequence.
template <typename T>
FilterRun<T> run_filter(const SigmaPModel<T>& model, std::span<const int> ys,
                        ImpossiblePolicy policy = ImpossiblePolicy::error) {
  detail::require_observations<T>(ys, model.m());
  const auto marg = sigma_p_marginals(model);
  return detail::drive<T>(
      ys, policy,
      [&](const FilterState<T>* prev, int y, std::int64_t t) {
        return prev ? sigma_p_step(model, prev->x_filt, y, t) : sigma_p_init(model, y);
      },
      [&](std::int64_t t) { return detail::reset_with<T>(t, marg.A, marg.output, false); });
}

/// Runs the Sigma_S predictor/filter pair over the whole sequence.
template <typename T>
FilterRun<T> run_filter(const SigmaSModel<T>& model, std::span<const int> ys,
                        ImpossiblePolicy policy = ImpossiblePolicy::error) {
  detail::require_observations<T>(ys, model.m());
  const auto marg = sigma_s_marginals(model);
  return detail::drive<T>(
      ys, policy,
      [&](const FilterState<T>* prev, int y, std::int64_t t) {
        return sigma_s_step(model, prev ? prev->x_pred : model.p0(), y, t);
      },
      [&](std::int64_t t) { return detail::reset_with<T>(t, marg.A, marg.output, true); });
}

/// Runs an HMC filter through the chosen route: the native recursion, or the
/// Sigma_P / Sigma_S recursion applied to the converted record. All three
/// produce identical states on the same input.
template <typename T>
FilterRun<T> run_filter(const HmcModel<T>& model, std::span<const int> ys, Route route = Route::native,
                        ImpossiblePolicy policy = ImpossiblePolicy::error) {
  switch (route) {
    case Route::sigma_p:
      return run_filter(hmc_to_sigma_p(model), ys, policy);
    case Route::sigma_s:
      return run_filter(hmc_to_sigma_s(model), ys, policy);
    case Route::native:
      break;
  }
  detail::require_observations<T>(ys, model.m());
  return detail::drive<T>(
      ys, policy,
      [&](const FilterState<T>* prev, int y, std::int64_t t) {
        return prev ? hmc_filter_step(model, prev->x_filt, y, t) : hmc_filter_init(model, y);
      },
      [&](std::int64_t t) { return detail::reset_with<T>(t, model.A(), model.G(), true); });
}

}  // namespace hmcfs
