// Model records for hidden Markov chains (HMC), Picci-type systems (Sigma_P)
// and Van Schuppen-type systems (Sigma_S), with the joint-kernel
// constructions Q and R and the structural membership tests.
//
// Generative semantics of the three records (0-based indices throughout):
//   HMC:     x_0 ~ p0, x_{t+1} ~ A.col(x_t), y_t ~ G.col(x_t).
//   Sigma_P: (x_0, y_0) ~ q0, (x_{t+1}, y_{t+1}) ~ Qbar.col(x_t).
//   Sigma_S: x_0 ~ p0, (y_t, x_{t+1}) ~ Rbar.col(x_t).
// Qbar and Rbar are the vertical stacks [B_0; ...; B_{m-1}] of the n x n
// blocks, so row k * n + i of column j is the probability of (output k,
// next state i) given current state j.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hmcfs/kron.hpp"

namespace hmcfs {

template <typename T>
class HmcModel {
 public:
  /// Throws ValidationError unless A (n x n) and G (m x n) are
  /// column-stochastic, p0 is a distribution and no row of G is zero.
  HmcModel(Mat<T> a, Mat<T> g, Vec<T> p0)
      : a_(std::move(a), "A"), g_(std::move(g), "G"), p0_(std::move(p0), "p0") {
    if (a_.rows() != a_.cols()) throw ValidationError("A", "", "must be square");
    if (g_.cols() != a_.rows())
      throw ValidationError("G", "", "must have n=" + std::to_string(a_.rows()) + " columns");
    if (p0_.size() != a_.rows())
      throw ValidationError("p0", "", "must have length n=" + std::to_string(a_.rows()));
    for (Eigen::Index k = 0; k < g_.rows(); ++k) {
      bool any = false;
      for (Eigen::Index i = 0; i < g_.cols(); ++i) any = any || g_(k, i) != T(0);
      if (!any) throw ValidationError("G", "row " + std::to_string(k + 1), "row is identically zero");
    }
  }

  Eigen::Index n() const noexcept { return a_.rows(); }
  Eigen::Index m() const noexcept { return g_.rows(); }
  const Mat<T>& A() const noexcept { return a_.matrix(); }
  const Mat<T>& G() const noexcept { return g_.matrix(); }
  const Vec<T>& p0() const noexcept { return p0_.vector(); }

 private:
  StochMatrix<T> a_;
  StochMatrix<T> g_;
  ProbVector<T> p0_;
};

namespace detail {
template <typename T>
Mat<T> stack_blocks(const std::vector<Mat<T>>& blocks, const char* field) {
  if (blocks.empty()) throw ValidationError(field, "", "need at least one block");
  const Eigen::Index n = blocks.front().rows();
  const auto m = static_cast<Eigen::Index>(blocks.size());
  Mat<T> out(n * m, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& b = blocks[static_cast<std::size_t>(k)];
    if (b.rows() != n || b.cols() != n)
      throw ValidationError(field, std::to_string(k + 1), "block must be " + std::to_string(n) +
                                                          "x" + std::to_string(n));
    out.block(k * n, 0, n, n) = b;
  }
  return out;
}

template <typename T>
std::vector<Mat<T>> split_blocks(const Mat<T>& stacked, Eigen::Index n) {
  std::vector<Mat<T>> blocks;
  for (Eigen::Index k = 0; k < stacked.rows() / n; ++k) blocks.push_back(stacked.block(k * n, 0, n, n));
  return blocks;
}
}  // namespace detail

/// Sigma_P system: blocks Q_1..Q_m and the initial law q0 of Z.
template <typename T>
class SigmaPModel {
 public:
  SigmaPModel(std::vector<Mat<T>> blocks, Vec<T> q0)
      : blocks_(std::move(blocks)),
        qbar_(detail::stack_blocks(blocks_, "blocks"), "blocks"),
        q0_(std::move(q0), "q0") {
    if (q0_.size() != qbar_.rows())
      throw ValidationError("q0", "", "must have length n*m=" + std::to_string(qbar_.rows()));
  }

  Eigen::Index n() const noexcept { return qbar_.cols(); }
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(blocks_.size()); }
  const std::vector<Mat<T>>& blocks() const noexcept { return blocks_; }
  const Mat<T>& block(Eigen::Index k) const { return blocks_.at(static_cast<std::size_t>(k)); }
  /// Qbar = [Q_1; ...; Q_m].
  const Mat<T>& stacked() const noexcept { return qbar_.matrix(); }
  const Vec<T>& q0() const noexcept { return q0_.vector(); }

 private:
  std::vector<Mat<T>> blocks_;
  StochMatrix<T> qbar_;
  ProbVector<T> q0_;
};

/// Sigma_S system: blocks R_1..R_m and the initial law p0 of X.
template <typename T>
class SigmaSModel {
 public:
  SigmaSModel(std::vector<Mat<T>> blocks, Vec<T> p0)
      : blocks_(std::move(blocks)),
        rbar_(detail::stack_blocks(blocks_, "blocks"), "blocks"),
        p0_(std::move(p0), "p0") {
    if (p0_.size() != rbar_.cols())
      throw ValidationError("p0", "", "must have length n=" + std::to_string(rbar_.cols()));
  }

  Eigen::Index n() const noexcept { return rbar_.cols(); }
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(blocks_.size()); }
  const std::vector<Mat<T>>& blocks() const noexcept { return blocks_; }
  const Mat<T>& block(Eigen::Index k) const { return blocks_.at(static_cast<std::size_t>(k)); }
  /// Rbar = [R_1; ...; R_m].
  const Mat<T>& stacked() const noexcept { return rbar_.matrix(); }
  const Vec<T>& p0() const noexcept { return p0_.vector(); }

 private:
  std::vector<Mat<T>> blocks_;
  StochMatrix<T> rbar_;
  ProbVector<T> p0_;
};

/// Unrestricted Markov chain on the joint states of Z = Y (x) X: the
/// transition matrix may depend on the current output as well as the state.
/// Used to build inputs that are NOT hidden Markov chains.
template <typename T>
class JointChainModel {
 public:
  JointChainModel(Eigen::Index n, Eigen::Index m, Mat<T> q, Vec<T> q0)
      : n_(n), m_(m), q_(std::move(q), "Q"), q0_(std::move(q0), "q0") {
    if (q_.rows() != n * m || q_.cols() != n * m)
      throw ValidationError("Q", "", "must be (n*m)x(n*m)");
    if (q0_.size() != n * m) throw ValidationError("q0", "", "must have length n*m");
  }

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return m_; }
  const Mat<T>& Q() const noexcept { return q_.matrix(); }
  const Vec<T>& q0() const noexcept { return q0_.vector(); }

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  StochMatrix<T> q_;
  ProbVector<T> q0_;
};

/// Q = Delta(G) A (1_m^T (x) I_n): transition matrix of Z = Y (x) X.
template <typename T>
Mat<T> build_q(const HmcModel<T>& model) {
  return delta(model.G()) * model.A() * x_selector<T>(model.n(), model.m());
}

/// R = (I_m (x) A) Delta(G) (1_m^T (x) I_n): transition matrix of
/// W_t = Y_{t-1} (x) X_t.
template <typename T>
Mat<T> build_r(const HmcModel<T>& model) {
  const Mat<T> eye = Mat<T>::Identity(model.m(), model.m());
  return kron(eye, model.A()) * delta(model.G()) * x_selector<T>(model.n(), model.m());
}

/// Q_i = diag(G_{i.}) A, q0 = Delta(G) p0.
template <typename T>
SigmaPModel<T> hmc_to_sigma_p(const HmcModel<T>& model) {
  std::vector<Mat<T>> blocks;
  for (Eigen::Index k = 0; k < model.m(); ++k)
    blocks.push_back(Vec<T>(model.G().row(k).transpose()).asDiagonal() * model.A());
  return SigmaPModel<T>(std::move(blocks), delta(model.G()) * model.p0());
}

/// R_i = A diag(G_{i.}), p0 unchanged.
template <typename T>
SigmaSModel<T> hmc_to_sigma_s(const HmcModel<T>& model) {
  std::vector<Mat<T>> blocks;
  for (Eigen::Index k = 0; k < model.m(); ++k)
    blocks.push_back(model.A() * Vec<T>(model.G().row(k).transpose()).asDiagonal());
  return SigmaSModel<T>(std::move(blocks), model.p0());
}

template <typename T>
struct StateOutputMarginals {
  Mat<T> A;       ///< n x n state transition.
  Mat<T> output;  ///< m x n: C for Sigma_P (next output), G for Sigma_S (current output).
};

/// A = sum_i Q_i, C = (I_m (x) 1_n^T) Qbar.
template <typename T>
StateOutputMarginals<T> sigma_p_marginals(const SigmaPModel<T>& model) {
  return {x_selector<T>(model.n(), model.m()) * model.stacked(),
          y_selector<T>(model.n(), model.m()) * model.stacked()};
}

/// A = (1_m^T (x) I_n) Rbar, G = (I_m (x) 1_n^T) Rbar.
template <typename T>
StateOutputMarginals<T> sigma_s_marginals(const SigmaSModel<T>& model) {
  return {x_selector<T>(model.n(), model.m()) * model.stacked(),
          y_selector<T>(model.n(), model.m()) * model.stacked()};
}

/// Result of recovering (A', G', p0') from a Sigma_P or Sigma_S record.
template <typename T>
struct HmcFactorization {
  bool is_hmc = false;
  Mat<T> A;
  Mat<T> G;
  Vec<T> p0;
  /// States whose column of G' is not determined by the record (the state is
  /// never entered and has no initial mass). Those columns are left zero and
  /// do not take part in the check.
  std::vector<Eigen::Index> undetermined_states;
  /// First violation, empty when is_hmc.
  std::string witness;
};

namespace detail {
template <typename T>
bool close(const T& a, const T& b, double tol) {
  return ScalarTraits<T>::near(a, b, tol);
}
}  // namespace detail

/// Checks Q_k = diag(G'_{k.}) A' for all k and q0 = Delta(G') p0', with
/// A' = sum_k Q_k and p0' = (1^T (x) I) q0. Row i of G' is read off the
/// column j maximizing A'(i, j); states never entered fall back to q0.
template <typename T>
HmcFactorization<T> recover_hmc_factors(const SigmaPModel<T>& model, double tol = 1e-9) {
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  HmcFactorization<T> f;
  f.A = sigma_p_marginals(model).A;
  f.p0 = x_selector<T>(n, m) * model.q0();
  f.G = Mat<T>::Zero(m, n);
  std::vector<bool> determined(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < n; ++j)
      if (f.A(i, j) > f.A(i, best)) best = j;
    if (f.A(i, best) > T(0)) {
      for (Eigen::Index k = 0; k < m; ++k) f.G(k, i) = model.block(k)(i, best) / f.A(i, best);
      determined[static_cast<std::size_t>(i)] = true;
    } else if (f.p0(i) > T(0)) {
      for (Eigen::Index k = 0; k < m; ++k) f.G(k, i) = model.q0()(joint_index(i, k, n)) / f.p0(i);
      determined[static_cast<std::size_t>(i)] = true;
    } else {
      f.undetermined_states.push_back(i);
    }
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!determined[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        const T expect = f.G(k, i) * f.A(i, j);
        if (!detail::close(model.block(k)(i, j), expect, tol)) {
          f.witness = "Q_" + std::to_string(k + 1) + "(" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ")=" + ScalarTraits<T>::format(model.block(k)(i, j)) +
                      " but G'A'=" + ScalarTraits<T>::format(expect);
          return f;
        }
      }
      const T q0_expect = f.G(k, i) * f.p0(i);
      if (!detail::close(model.q0()(joint_index(i, k, n)), q0_expect, tol)) {
        f.witness = "q0(" + std::to_string(joint_index(i, k, n) + 1) + ")=" +
                    ScalarTraits<T>::format(model.q0()(joint_index(i, k, n))) +
                    " but Delta(G')p0'=" + ScalarTraits<T>::format(q0_expect);
        return f;
      }
    }
  }
  f.is_hmc = true;
  return f;
}

/// Checks R_k = A' diag(G'_{k.}) with A', G' from sigma_s_marginals. Every
/// column of G' is determined because columns of A' sum to one.
template <typename T>
HmcFactorization<T> recover_hmc_factors(const SigmaSModel<T>& model, double tol = 1e-9) {
  const auto marg = sigma_s_marginals(model);
  HmcFactorization<T> f;
  f.A = marg.A;
  f.G = marg.output;
  f.p0 = model.p0();
  for (Eigen::Index k = 0; k < model.m(); ++k) {
    for (Eigen::Index i = 0; i < model.n(); ++i) {
      for (Eigen::Index j = 0; j < model.n(); ++j) {
        const T expect = f.A(i, j) * f.G(k, j);
        if (!detail::close(model.block(k)(i, j), expect, tol)) {
          f.witness = "R_" + std::to_string(k + 1) + "(" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ")=" + ScalarTraits<T>::format(model.block(k)(i, j)) +
                      " but A'G'=" + ScalarTraits<T>::format(expect);
          return f;
        }
      }
    }
  }
  f.is_hmc = true;
  return f;
}

/// True iff the Sigma_P record is the law of a hidden Markov chain
/// (Qbar = Delta(G') A' and q0 = Delta(G') p0'). `tol` is ignored for exact
/// scalars.
template <typename T>
bool is_hmc_sigma_p(const SigmaPModel<T>& model, double tol = 1e-9) {
  return recover_hmc_factors(model, tol).is_hmc;
}

/// True iff Rbar = (I_m (x) A') Delta(G').
template <typename T>
bool is_hmc_sigma_s(const SigmaSModel<T>& model, double tol = 1e-9) {
  return recover_hmc_factors(model, tol).is_hmc;
}

/// Recovers the HMC record from a Sigma_P / Sigma_S record that passes the
/// membership test. Undetermined columns of G' are filled with e_1 so the
/// result validates; they carry no probability mass.
template <typename T, typename Model>
std::optional<HmcModel<T>> as_hmc(const Model& model, double tol = 1e-9) {
  auto f = recover_hmc_factors(model, tol);
  if (!f.is_hmc) return std::nullopt;
  for (auto i : f.undetermined_states) f.G(0, i) = T(1);
  return HmcModel<T>(f.A, f.G, f.p0);
}

template <typename T>
struct InvariantDistribution {
  Vec<T> pi;
  /// False when A has more than one closed communicating class; pi is then
  /// the invariant law supported on the class containing the lowest state.
  bool unique = true;
  std::size_t closed_classes = 1;
};

namespace detail {
/// Solves M x = b by Gaussian elimination with largest-magnitude pivoting.
/// M must be nonsingular.
template <typename T>
Vec<T> solve_dense(Mat<T> a, Vec<T> b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index p = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      using std::abs;
      if (abs(a(r, c)) > abs(a(p, c))) p = r;
    }
    if (a(p, c) == T(0)) throw Error("solve_dense: singular system");
    a.row(c).swap(a.row(p));
    std::swap(b(c), b(p));
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c || a(r, c) == T(0)) continue;
      const T factor = a(r, c) / a(c, c);
      a.row(r) -= factor * a.row(c);
      b(r) -= factor * b(c);
    }
  }
  Vec<T> x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = b(i) / a(i, i);
  return x;
}
}  // namespace detail

/// Invariant probability vector of a column-stochastic A (A pi = pi).
/// The closed communicating classes of the support graph are found first;
/// pi is the unique invariant law of the first closed class, obtained by a
/// direct linear solve (exact over rationals).
template <typename T>
InvariantDistribution<T> invariant_distribution(const StochMatrix<T>& a) {
  const Eigen::Index n = a.rows();
  // reach(i, j): j is reachable from i (edge j <- i when A(j, i) > 0).
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> reach(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) reach(i, j) = (i == j) || a(j, i) > T(0);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) reach(i, j) = reach(i, j) || (reach(i, k) && reach(k, j));

  std::vector<Eigen::Index> class_of(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool closed = true;
    for (Eigen::Index j = 0; j < n; ++j) closed = closed && (!reach(i, j) || reach(j, i));
    if (!closed || class_of[static_cast<std::size_t>(i)] >= 0) continue;
    std::vector<Eigen::Index> cls;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (reach(i, j)) {
        cls.push_back(j);
        class_of[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(classes.size());
      }
    }
    classes.push_back(std::move(cls));
  }

  const auto& cls = classes.front();
  const auto k = static_cast<Eigen::Index>(cls.size());
  Mat<T> sys(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c)
      sys(r, c) = a(cls[static_cast<std::size_t>(r)], cls[static_cast<std::size_t>(c)]) -
                  (r == c ? T(1) : T(0));
  // The rows of (A_CC - I) sum to zero, so one is redundant: replace it by
  // the normalization constraint.
  sys.row(k - 1).setConstant(T(1));
  Vec<T> rhs = Vec<T>::Zero(k);
  rhs(k - 1) = T(1);
  const Vec<T> local = detail::solve_dense(sys, rhs);

  InvariantDistribution<T> out;
  out.pi = Vec<T>::Zero(n);
  for (Eigen::Index r = 0; r < k; ++r) out.pi(cls[static_cast<std::size_t>(r)]) = local(r);
  out.closed_classes = classes.size();
  out.unique = classes.size() == 1;
  return out;
}

/// Entrywise conversion of a whole model record between scalar fields.
template <typename To, typename From>
HmcModel<To> cast_model(const HmcModel<From>& m) {
  return HmcModel<To>(cast_matrix<To>(m.A()), cast_matrix<To>(m.G()), cast_vector<To>(m.p0()));
}

template <typename To, typename From>
SigmaPModel<To> cast_model(const SigmaPModel<From>& m) {
  std::vector<Mat<To>> blocks;
  for (const auto& b : m.blocks()) blocks.push_back(cast_matrix<To>(b));
  return SigmaPModel<To>(std::move(blocks), cast_vector<To>(m.q0()));
}

template <typename To, typename From>
SigmaSModel<To> cast_model(const SigmaSModel<From>& m) {
  std::vector<Mat<To>> blocks;
  for (const auto& b : m.blocks()) blocks.push_back(cast_matrix<To>(b));
  return SigmaSModel<To>(std::move(blocks), cast_vector<To>(m.p0()));
}

}  // namespace hmcfs
