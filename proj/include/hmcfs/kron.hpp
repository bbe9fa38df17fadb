// Dense vec / Kronecker / Delta calculus.
//
// Conventions (used everywhere in hmcfs):
//  * Kernels are COLUMN-stochastic: entry (i, j) is the probability of moving
//    to i from j.  A(i, j) = P(X_{t+1} = e_i | X_t = e_j) and
//    G(k, i) = P(Y_t = f_k | X_t = e_i).
//  * vec() stacks columns.  The joint state (e_i, f_k) of Z = Y (x) X has the
//    0-based index k * n + i.
//  * Delta(G) for G in R^{m x n} stacks diag(G.row(0)), ..., diag(G.row(m-1))
//    into an (n m) x n matrix.
#pragma once

#include <Eigen/Dense>

#include <string>

#include "hmcfs/errors.hpp"
#include "hmcfs/scalar.hpp"

namespace hmcfs {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Joint index of (state i, output k) in Z = Y (x) X.
inline Eigen::Index joint_index(Eigen::Index state, Eigen::Index output, Eigen::Index n) {
  return output * n + state;
}

template <typename A, typename B>
Mat<typename A::Scalar> kron(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using T = typename A::Scalar;
  static_assert(std::is_same_v<T, typename B::Scalar>, "kron: mixed scalar types");
  Mat<T> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Column-stacking vectorization.
template <typename M>
Vec<typename M::Scalar> vec(const Eigen::MatrixBase<M>& m) {
  Vec<typename M::Scalar> out(m.rows() * m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.segment(j * m.rows(), m.rows()) = m.col(j);
  return out;
}

/// Delta(G): (m n) x n, block k equal to diag(G.row(k)).
template <typename M>
Mat<typename M::Scalar> delta(const Eigen::MatrixBase<M>& g) {
  using T = typename M::Scalar;
  const Eigen::Index m = g.rows();
  const Eigen::Index n = g.cols();
  Mat<T> out = Mat<T>::Zero(m * n, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) out(k * n + i, i) = g(k, i);
  }
  return out;
}

template <typename T>
Mat<T> diag(const Vec<T>& v) {
  return v.asDiagonal();
}

template <typename T>
RowVec<T> ones_row(Eigen::Index n) {
  return RowVec<T>::Constant(n, T(1));
}

template <typename T>
Vec<T> basis(Eigen::Index n, Eigen::Index i) {
  Vec<T> e = Vec<T>::Zero(n);
  e(i) = T(1);
  return e;
}

/// (1_m^T (x) I_n): maps Z to X.
template <typename T>
Mat<T> x_selector(Eigen::Index n, Eigen::Index m) {
  return kron(ones_row<T>(m), Mat<T>::Identity(n, n));
}

/// (I_m (x) 1_n^T): maps Z to Y.
template <typename T>
Mat<T> y_selector(Eigen::Index n, Eigen::Index m) {
  return kron(Mat<T>::Identity(m, m), ones_row<T>(n));
}

template <typename M>
bool is_nonnegative(const Eigen::MatrixBase<M>& m) {
  using T = typename M::Scalar;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) < T(0)) return false;
  return true;
}

/// Nonnegative with every column summing to one (exactly, or within the
/// field's stochastic tolerance for doubles).
template <typename M>
bool is_column_stochastic(const Eigen::MatrixBase<M>& m) {
  using T = typename M::Scalar;
  if (!is_nonnegative(m)) return false;
  const T tol = ScalarTraits<T>::stochastic_tolerance();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const T s = m.col(j).sum();
    if constexpr (is_exact_v<T>) {
      if (s != T(1)) return false;
    } else {
      if (std::abs(s - 1.0) > tol) return false;
    }
  }
  return true;
}

template <typename T>
bool is_probability_vector(const Vec<T>& v) {
  return is_column_stochastic(v);
}

namespace detail {
template <typename T>
void require_stochastic(const Mat<T>& m, const std::string& field) {
  if (m.rows() < 1 || m.cols() < 1) throw ValidationError(field, "", "empty matrix");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) < T(0))
        throw ValidationError(field, std::to_string(i + 1) + "," + std::to_string(j + 1),
                              "negative entry " + ScalarTraits<T>::format(m(i, j)));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (!is_column_stochastic(m.col(j)))
      throw ValidationError(field, "col " + std::to_string(j + 1),
                            "column sums to " + ScalarTraits<T>::format(m.col(j).sum()) +
                                ", expected 1 (column-stochastic convention)");
  }
}
}  // namespace detail

/// Column-stochastic matrix. Validated on construction; immutable afterwards.
template <typename T>
class StochMatrix {
 public:
  explicit StochMatrix(Mat<T> m, const std::string& field = "matrix") : m_(std::move(m)) {
    detail::require_stochastic(m_, field);
  }

  const Mat<T>& matrix() const noexcept { return m_; }
  operator const Mat<T>&() const noexcept { return m_; }
  Eigen::Index rows() const noexcept { return m_.rows(); }
  Eigen::Index cols() const noexcept { return m_.cols(); }
  const T& operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Mat<T> m_;
};

/// Probability vector (nonnegative, sums to one).
template <typename T>
class ProbVector {
 public:
  explicit ProbVector(Vec<T> v, const std::string& field = "vector") : v_(std::move(v)) {
    detail::require_stochastic(Mat<T>(v_), field);
  }

  const Vec<T>& vector() const noexcept { return v_; }
  operator const Vec<T>&() const noexcept { return v_; }
  Eigen::Index size() const noexcept { return v_.size(); }
  const T& operator()(Eigen::Index i) const { return v_(i); }

 private:
  Vec<T> v_;
};

/// Entrywise conversion between scalar fields.
template <typename To, typename M>
Mat<To> cast_matrix(const Eigen::MatrixBase<M>& m) {
  Mat<To> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out(i, j) = scalar_cast<To>(m(i, j));
  return out;
}

template <typename To, typename M>
Vec<To> cast_vector(const Eigen::MatrixBase<M>& v) {
  Vec<To> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = scalar_cast<To>(v(i));
  return out;
}

}  // namespace hmcfs
