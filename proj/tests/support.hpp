// Shared generators and independent oracles for the test binaries.
#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include "hmcfs/filters.hpp"
#include "hmcfs/finprob.hpp"

namespace testing {

using hmcfs::HmcModel;
using hmcfs::Mat;
using hmcfs::Rational;
using hmcfs::Vec;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Rational q(long num, long den = 1) { return Rational(num, den); }

/// Column-stochastic rational matrix with columns w / sum(w), w_i in
/// [min_weight, max_weight].
inline Mat<Rational> random_stochastic(Rng& rng, Index rows, Index cols, int min_weight = 0, int max_weight = 4) {
  Mat<Rational> out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    std::vector<int> w(static_cast<std::size_t>(rows));
    int total = 0;
    while (total == 0) {
      total = 0;
      for (auto& x : w) total += (x = uniform_int(rng, min_weight, max_weight));
    }
    for (Index i = 0; i < rows; ++i) out(i, j) = q(w[static_cast<std::size_t>(i)], total);
  }
  return out;
}

inline Vec<Rational> random_prob(Rng& rng, Index n, int min_weight = 0, int max_weight = 4) {
  return random_stochastic(rng, n, 1, min_weight, max_weight).col(0);
}

/// Columns are k/den with den a power of two, so every entry is exact in
/// binary floating point.
inline Mat<Rational> random_dyadic_stochastic(Rng& rng, Index rows, Index cols, int den = 16) {
  Mat<Rational> out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    std::vector<int> cuts{0, den};
    for (Index i = 0; i + 1 < rows; ++i) cuts.push_back(uniform_int(rng, 0, den));
    std::sort(cuts.begin(), cuts.end());
    for (Index i = 0; i < rows; ++i)
      out(i, j) = q(cuts[static_cast<std::size_t>(i) + 1] - cuts[static_cast<std::size_t>(i)], den);
  }
  return out;
}

inline bool has_zero_row(const Mat<Rational>& g) {
  for (Index k = 0; k < g.rows(); ++k)
    if ((g.row(k).array() == Rational(0)).all()) return true;
  return false;
}

/// Random HMC; with `positive` every entry of A, G and p0 is nonzero.
inline HmcModel<Rational> random_hmc(Rng& rng, Index n, Index m, bool positive = false) {
  const int lo = positive ? 1 : 0;
  Mat<Rational> g;
  do g = random_stochastic(rng, m, n, lo); while (has_zero_row(g));
  return HmcModel<Rational>(random_stochastic(rng, n, n, lo), g, random_prob(rng, n, lo));
}

inline HmcModel<Rational> random_dyadic_hmc(Rng& rng, Index n, Index m) {
  Mat<Rational> g;
  do g = random_dyadic_stochastic(rng, m, n); while (has_zero_row(g));
  return HmcModel<Rational>(random_dyadic_stochastic(rng, n, n), g, random_dyadic_stochastic(rng, n, 1).col(0));
}

/// Entries p/q with p in [-5, 5], q in [1, 6]; no stochasticity.
inline Mat<Rational> random_matrix(Rng& rng, Index rows, Index cols) {
  Mat<Rational> out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = q(uniform_int(rng, -5, 5), uniform_int(rng, 1, 6));
  return out;
}

/// Moves `amount` of mass inside column `col` of Q_1 from row `from` to row
/// `to` of the same block. Requires Q_1(from, col) >= amount.
inline hmcfs::SigmaPModel<Rational> perturb_sigma_p(const hmcfs::SigmaPModel<Rational>& model, Index from, Index to,
                                                    Index col, const Rational& amount) {
  auto blocks = model.blocks();
  blocks[0](from, col) -= amount;
  blocks[0](to, col) += amount;
  return hmcfs::SigmaPModel<Rational>(blocks, model.q0());
}

inline hmcfs::SigmaSModel<Rational> perturb_sigma_s(const hmcfs::SigmaSModel<Rational>& model, Index from, Index to,
                                                    Index col, const Rational& amount) {
  auto blocks = model.blocks();
  blocks[0](from, col) -= amount;
  blocks[0](to, col) += amount;
  return hmcfs::SigmaSModel<Rational>(blocks, model.p0());
}

/// Joint chain on Z whose transition law depends on the current output:
/// starting from build_q(model), in every column with output 0 a fraction of
/// the mass going to (state 0, output k) is moved to (state 1, output k).
/// The x-marginal of the next step then depends on y_t, so the pair is not
/// a hidden Markov chain. Needs n >= 2 and a positive model.
inline hmcfs::JointChainModel<Rational> output_dependent_chain(const HmcModel<Rational>& model,
                                                               const Rational& fraction) {
  const Index n = model.n();
  const Index m = model.m();
  Mat<Rational> qm = hmcfs::build_q(model);
  for (Index j = 0; j < n; ++j) {
    const Index col = hmcfs::joint_index(j, 0, n);
    for (Index k = 0; k < m; ++k) {
      const Rational moved = qm(hmcfs::joint_index(0, k, n), col) * fraction;
      qm(hmcfs::joint_index(0, k, n), col) -= moved;
      qm(hmcfs::joint_index(1, k, n), col) += moved;
    }
  }
  return hmcfs::JointChainModel<Rational>(n, m, qm, hmcfs::delta(model.G()) * model.p0());
}

/// Direct Bayes chain rule over all state paths, written without the filter
/// recursion or the enumeration engine.
struct DirectPosterior {
  std::vector<Vec<Rational>> filter;     // law of X_t given y_0..y_t
  std::vector<Vec<Rational>> predictor;  // law of X_{t+1} given y_0..y_t
  std::vector<Rational> evidence;        // P(y_0..y_t)
};

inline DirectPosterior direct_posterior(const HmcModel<Rational>& model, const std::vector<int>& ys) {
  const Index n = model.n();
  DirectPosterior out;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    Vec<Rational> joint = Vec<Rational>::Zero(n);
    std::vector<int> path(t + 1, 0);
    std::function<void(std::size_t, Rational)> walk = [&](std::size_t s, Rational w) {
      if (s == t + 1) {
        joint(path[t]) += w;
        return;
      }
      for (int i = 0; i < n; ++i) {
        path[s] = i;
        const Rational step = s == 0 ? model.p0()(i) : model.A()(i, path[s - 1]);
        walk(s + 1, w * step * model.G()(ys[s], i));
      }
    };
    walk(0, Rational(1));
    const Rational evidence = joint.sum();
    out.evidence.push_back(evidence);
    if (evidence == 0) {
      out.filter.push_back(Vec<Rational>::Zero(n));
      out.predictor.push_back(Vec<Rational>::Zero(n));
      continue;
    }
    out.filter.push_back(joint / evidence);
    out.predictor.push_back(model.A() * joint / evidence);
  }
  return out;
}

/// All sequences in {0..m-1}^len.
inline std::vector<std::vector<int>> all_sequences(int m, std::size_t len) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(len, 0);
  while (true) {
    out.push_back(cur);
    std::size_t i = 0;
    while (i < len && ++cur[i] == m) cur[i++] = 0;
    if (i == len) break;
  }
  return out;
}

/// The fixed 2-state example shipped in docs/examples/hmc2.json.
inline HmcModel<Rational> example_hmc2() {
  Mat<Rational> a(2, 2), g(2, 2);
  a << q(3, 4), q(1, 2), q(1, 4), q(1, 2);
  g << q(7, 8), q(1, 4), q(1, 8), q(3, 4);
  Vec<Rational> p0(2);
  p0 << q(1, 2), q(1, 2);
  return HmcModel<Rational>(a, g, p0);
}

inline Mat<Rational> identity(Index n) { return Mat<Rational>::Identity(n, n); }

inline Vec<Rational> vec_of(std::initializer_list<Rational> xs) {
  Vec<Rational> v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (const auto& x : xs) v(i++) = x;
  return v;
}

}  // namespace testing
