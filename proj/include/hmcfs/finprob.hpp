// Exact finite probability spaces: trajectory enumeration, partition-generated
// sigma-algebras, conditional expectation, and verifiers for the structural
// properties of hidden Markov chains and stochastic systems.
//
// sigma-algebras are represented extensionally as partitions of the atoms.
// The filtrations used by the verifiers are generated by trajectory prefixes:
//   F_t   = sigma(x_0..x_t, y_0..y_t)
//   G_t   = sigma(x_0..x_t, y_0..y_{t-1})
//   F^Y_t = sigma(y_0..y_t)
// Zero-probability cells are skipped by the verifiers; conditional
// expectations on them are defined to be zero.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmcfs/models.hpp"

namespace hmcfs {

/// Per-atom values of a random vector: row a is the value on atom a.
using RandVec = Mat<Rational>;

class FiniteSpace {
 public:
  struct Atom {
    std::vector<int> x;  ///< state path (empty for abstract atoms)
    std::vector<int> y;  ///< output path (empty for abstract atoms)
    Rational weight;
  };

  /// Throws ValidationError unless every weight is >= 0 and they sum to 1.
  FiniteSpace(std::vector<Atom> atoms, int n = 0, int m = 0);

  /// Abstract space with atom ids 0..weights.size()-1.
  static FiniteSpace abstract(const std::vector<Rational>& weights);

  std::size_t size() const noexcept { return atoms_.size(); }
  const Atom& atom(std::size_t a) const { return atoms_[a]; }
  const Rational& weight(std::size_t a) const { return atoms_[a].weight; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  int n() const noexcept { return n_; }
  int m() const noexcept { return m_; }
  /// Number of x / y coordinates shared by every atom.
  std::size_t x_length() const noexcept { return x_len_; }
  std::size_t y_length() const noexcept { return y_len_; }

 private:
  std::vector<Atom> atoms_;
  int n_;
  int m_;
  std::size_t x_len_ = 0;
  std::size_t y_len_ = 0;
};

class Partition {
 public:
  /// Groups atoms with equal keys. Cells are numbered in order of first
  /// appearance, so no cell is empty.
  template <typename Key>
  static Partition from_keys(const std::vector<Key>& keys) {
    std::map<Key, std::size_t> index;
    Partition p;
    p.cell_of_.reserve(keys.size());
    for (const auto& k : keys) {
      auto [it, inserted] = index.try_emplace(k, index.size());
      if (inserted) p.cells_.emplace_back();
      p.cells_[it->second].push_back(p.cell_of_.size());
      p.cell_of_.push_back(it->second);
    }
    return p;
  }

  /// Builds a partition from an explicit cell list. Throws ValidationError
  /// unless the cells are nonempty, disjoint and cover 0..atoms-1.
  static Partition from_cells(std::vector<std::vector<std::size_t>> cells, std::size_t atoms);
  static Partition trivial(std::size_t atoms);
  static Partition finest(std::size_t atoms);
  /// Coarsest common refinement (the join of the generated sigma-algebras).
  static Partition join(const Partition& a, const Partition& b);

  std::size_t size() const noexcept { return cells_.size(); }
  std::size_t atoms() const noexcept { return cell_of_.size(); }
  std::size_t cell_of(std::size_t atom) const { return cell_of_[atom]; }
  const std::vector<std::size_t>& cell(std::size_t c) const { return cells_[c]; }

 private:
  std::vector<std::size_t> cell_of_;
  std::vector<std::vector<std::size_t>> cells_;
};

// ---------------------------------------------------------------------------
// Enumeration.

/// Atom budget: HMC_ATOM_BUDGET when set to a positive integer, else 10^6.
std::uint64_t atom_budget();

/// One atom per trajectory (x_0..x_T, y_0..y_T) with weight
/// p0(x_0) G(y_0, x_0) prod_t A(x_t, x_{t-1}) G(y_t, x_t); zero-weight atoms
/// are pruned. Throws BudgetExceeded when (n m)^{T+1} exceeds `budget`.
FiniteSpace enumerate_hmc(const HmcModel<Rational>& model, int horizon,
                          std::uint64_t budget = atom_budget());
/// (x_0, y_0) ~ q0, (x_{t+1}, y_{t+1}) ~ Qbar.col(x_t); paths of length T+1.
FiniteSpace enumerate_sigma_p(const SigmaPModel<Rational>& model, int horizon,
                              std::uint64_t budget = atom_budget());
/// x_0 ~ p0, (y_t, x_{t+1}) ~ Rbar.col(x_t); x has length T+1, y length T.
FiniteSpace enumerate_sigma_s(const SigmaSModel<Rational>& model, int horizon,
                              std::uint64_t budget = atom_budget());
/// z_0 ~ q0, z_{t+1} ~ Q.col(z_t); paths of length T+1.
FiniteSpace enumerate_joint(const JointChainModel<Rational>& model, int horizon,
                            std::uint64_t budget = atom_budget());

/// Law of the prefixes (x_0..x_{x_len-1}, y_0..y_{y_len-1}): atoms that agree
/// on the prefix are merged and their weights summed.
FiniteSpace marginalize(const FiniteSpace& space, std::size_t x_len, std::size_t y_len);

// ---------------------------------------------------------------------------
// Partitions and random vectors on trajectory spaces.

Partition partition_f(const FiniteSpace& space, int t);    ///< F_t (t = -1: trivial)
Partition partition_g(const FiniteSpace& space, int t);    ///< G_t
Partition partition_fy(const FiniteSpace& space, int t);   ///< F^Y_t (t = -1: trivial)
Partition partition_x_at(const FiniteSpace& space, int t); ///< sigma(X_t)
Partition partition_y_at(const FiniteSpace& space, int t); ///< sigma(Y_t)

RandVec state_indicator(const FiniteSpace& space, int t);   ///< X_t, atoms x n
RandVec output_indicator(const FiniteSpace& space, int t);  ///< Y_t, atoms x m
RandVec joint_indicator(const FiniteSpace& space, int t);   ///< Z_t = Y_t (x) X_t
RandVec shifted_indicator(const FiniteSpace& space, int t); ///< W_t = Y_{t-1} (x) X_t

/// Sum of weight(a) * u.row(a).
Vec<Rational> expectation(const FiniteSpace& space, const RandVec& u);

/// E[U | sigma]: on each positive-weight cell the weighted average of U over
/// the cell, zero on zero-weight cells.
RandVec cond_exp(const FiniteSpace& space, const RandVec& u, const Partition& sigma);

// ---------------------------------------------------------------------------
// Reports.

struct CheckResult {
  std::string check;
  std::int64_t t = -1;  ///< -1 when the check is not tied to a time index
  bool pass = true;
  std::string witness;  ///< atom / trajectory prefix where the check failed
  std::string lhs;
  std::string rhs;
};

struct Report {
  std::vector<CheckResult> checks;

  bool passed() const;
  /// Appends `other` with every check name prefixed by `prefix`.
  void append(const Report& other, const std::string& prefix = "");
  const CheckResult* find(const std::string& check) const;
};

std::string format_vector(const Vec<Rational>& v);
std::string format_matrix(const Mat<Rational>& m);
std::string format_path(const FiniteSpace::Atom& atom, std::size_t x_len, std::size_t y_len);

// ---------------------------------------------------------------------------
// Conditioning lemma.

/// Evaluates both sides of
///   E[U | F0 v H]  = sum_i E_i[U | F0] 1_{H_i}
///   E[U | F0]      = sum_i E_i[U | F0] E[1_{H_i} | F0]
///   E[1_{H_j} U | F0] = E[1_{H_j} | F0] E_j[U | F0]     (every j)
/// atomwise, where E_i is expectation under P(. | H_i), computed on the
/// reweighted space; E_i is taken as zero when P(H_i) = 0.
Report lemma_a1_check(const FiniteSpace& space, const RandVec& u, const Partition& f0, const Partition& h);

// ---------------------------------------------------------------------------
// Oracle posteriors.

enum class PosteriorKind { filter, predictor };

struct Posterior {
  Vec<Rational> law;       ///< conditional law of X_t (filter) or X_{t+1} (predictor)
  Rational history_prob;   ///< P(y_0..y_t)
};

/// For every positive-probability prefix y_0..y_t, the exact conditional law
/// of X_t (filter) or X_{t+1} (predictor), by summation over atoms.
std::map<std::vector<int>, Posterior> oracle_posteriors(const FiniteSpace& space, int t, PosteriorKind kind);

// ---------------------------------------------------------------------------
// Structural verifiers.

/// E[Z_t | F_{t-1}] = Delta(K) E[X_t | F_{t-1}] on every positive cell and
/// every t (F_{-1} trivial). When `k` is empty the columns of K are inferred
/// from the first cell that gives their state positive mass and must then
/// agree everywhere.
Report verify_factorization(const FiniteSpace& space, const std::optional<Mat<Rational>>& k = std::nullopt);

/// E[W_{t+1} | G_t] = E[Y_t | G_t] (x) E[X_{t+1} | G_t] on every positive cell.
Report verify_splitting(const FiniteSpace& space);

/// Output property E[Y_t | G_t] = E[Y_t | X_t], extended output property
/// E[Z_t | G_t] = E[Z_t | X_t], time-invariance of G, and B = Delta(G).
/// When `g` is given, also checks that the extracted G equals it on every
/// state with positive mass.
Report verify_output_properties(const FiniteSpace& space, const std::optional<Mat<Rational>>& g = std::nullopt);

enum class MarkovKind { z_in_f, w_in_g, x_in_f, x_in_g };

struct MarkovResult {
  bool markov = false;
  /// Extracted transition matrix; only `observed` columns are meaningful.
  Mat<Rational> matrix;
  std::vector<bool> observed;
  Report report;
};

/// On every positive-probability history cell the one-step conditional law
/// must depend only on the current coordinate (Z_t, W_t or X_t) and be the
/// same at every t. With `expected`, observed columns must equal it.
MarkovResult verify_markov(const FiniteSpace& space, MarkovKind kind,
                           const std::optional<Mat<Rational>>& expected = std::nullopt);

/// Sigma_P membership: the law of Z_{t+1} given F_t depends only on X_t.
Report verify_sigma_p_membership(const FiniteSpace& space);
/// Sigma_S membership: the law of W_{t+1} given G_t depends only on X_t.
Report verify_sigma_s_membership(const FiniteSpace& space);

struct EquivalenceReport {
  bool a = false;  ///< X F-Markov and factorization
  bool b = false;  ///< X G-Markov and splitting
  bool c = false;  ///< Z F-Markov with Q = Delta(G) A (1^T (x) I)
  bool d = false;  ///< W G-Markov with R = (I (x) A) Delta(G) (1^T (x) I)
  bool e = false;  ///< law of (X, Y) is that of an HMC
  Report report;

  bool all_true() const { return a && b && c && d && e; }
  bool all_false() const { return !a && !b && !c && !d && !e; }
  bool agree() const { return all_true() || all_false(); }
};

/// Evaluates the five equivalent characterizations of a hidden Markov chain
/// on a trajectory space whose atoms carry x and y paths of equal length.
EquivalenceReport theorem_3_5_suite(const FiniteSpace& space);
/// Enumerates the model to `horizon` and runs the suite; additionally checks
/// the extracted Z and W matrices against build_q / build_r.
EquivalenceReport theorem_3_5_suite(const HmcModel<Rational>& model, int horizon,
                                    std::uint64_t budget = atom_budget());

}  // namespace hmcfs
