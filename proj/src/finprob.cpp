#include "hmcfs/finprob.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

namespace hmcfs {

namespace {

using Index = Eigen::Index;

std::vector<int> prefix_key(const FiniteSpace::Atom& atom, std::size_t xs, std::size_t ys) {
  std::vector<int> key;
  key.reserve(xs + ys + 1);
  key.insert(key.end(), atom.x.begin(), atom.x.begin() + static_cast<std::ptrdiff_t>(xs));
  key.push_back(-1);
  key.insert(key.end(), atom.y.begin(), atom.y.begin() + static_cast<std::ptrdiff_t>(ys));
  return key;
}

Partition prefix_partition(const FiniteSpace& space, std::size_t xs, std::size_t ys) {
  if (xs > space.x_length() || ys > space.y_length())
    throw ValidationError("t", "", "time index beyond the enumerated horizon");
  std::vector<std::vector<int>> keys;
  keys.reserve(space.size());
  for (const auto& atom : space.atoms()) keys.push_back(prefix_key(atom, xs, ys));
  return Partition::from_keys(keys);
}

std::size_t count(int t) { return t < 0 ? 0 : static_cast<std::size_t>(t) + 1; }

std::uint64_t saturating_pow(std::uint64_t base, int exp) {
  std::uint64_t out = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && out > std::numeric_limits<std::uint64_t>::max() / base)
      return std::numeric_limits<std::uint64_t>::max();
    out *= base;
  }
  return out;
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

void require_budget(std::uint64_t atoms, std::uint64_t budget) {
  if (atoms > budget) throw BudgetExceeded(atoms, budget);
}

void require_horizon(int horizon) {
  if (horizon < 0) throw ValidationError("horizon", "", "must be >= 0");
}

/// Depth-first enumeration of a chain on "joint" symbols. `initial(s)` is the
/// mass of symbol s at time 0, `step(prev, s)` the transition mass, and
/// `emit(s, atom)` appends the coordinates of s to the atom.
template <typename Initial, typename Step, typename Emit>
std::vector<FiniteSpace::Atom> enumerate_chain(int symbols, int horizon, Initial initial, Step step,
                                               Emit emit, int steps) {
  std::vector<FiniteSpace::Atom> atoms;
  std::vector<int> path;
  std::function<void(const Rational&)> recurse = [&](const Rational& w) {
    if (static_cast<int>(path.size()) == steps + 1) {
      FiniteSpace::Atom atom;
      for (std::size_t i = 0; i < path.size(); ++i) emit(path[i], static_cast<int>(i), atom);
      atom.weight = w;
      atoms.push_back(std::move(atom));
      return;
    }
    for (int s = 0; s < symbols; ++s) {
      const Rational p = path.empty() ? initial(s) : step(path.back(), s);
      if (p == 0) continue;
      path.push_back(s);
      recurse(w * p);
      path.pop_back();
    }
  };
  (void)horizon;
  recurse(Rational(1));
  return atoms;
}

/// Joint-symbol HMC enumeration on raw matrices (no validation of G rows).
std::vector<FiniteSpace::Atom> enumerate_hmc_atoms(const Mat<Rational>& a, const Mat<Rational>& g,
                                                   const Vec<Rational>& p0, int horizon) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(g.rows());
  return enumerate_chain(
      n * m, horizon,
      [&](int z) { return p0(z % n) * g(z / n, z % n); },
      [&](int prev, int z) { return a(z % n, prev % n) * g(z / n, z % n); },
      [n](int z, int, FiniteSpace::Atom& atom) {
        atom.x.push_back(z % n);
        atom.y.push_back(z / n);
      },
      horizon);
}

// ---------------------------------------------------------------------------
// Cell statistics.

struct CellLaw {
  Rational mass;
  Vec<Rational> sum;
  std::size_t rep = 0;  // representative atom

  Vec<Rational> law() const { return sum / mass; }
};

/// For each cell, the mass and the weighted sum of the one-hot vector
/// e_{index(atom)} of dimension `dim`.
template <typename IndexFn>
std::vector<CellLaw> cell_laws(const FiniteSpace& space, const Partition& p, Index dim, IndexFn index) {
  std::vector<CellLaw> laws(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    laws[c].sum = Vec<Rational>::Zero(dim);
    laws[c].rep = p.cell(c).front();
  }
  for (std::size_t a = 0; a < space.size(); ++a) {
    const auto& w = space.weight(a);
    if (w == 0) continue;
    auto& cl = laws[p.cell_of(a)];
    cl.mass += w;
    cl.sum(index(space.atom(a))) += w;
  }
  return laws;
}

std::string path_witness(const FiniteSpace& space, std::size_t atom, std::size_t xs, std::size_t ys) {
  return format_path(space.atom(atom), xs, ys);
}

/// Generic kernel extraction: over t in [t0, t1], on each positive cell of
/// cells(t), the law of next(atom, t) must depend only on key(atom, t).
struct KernelCheck {
  bool pass = true;
  Mat<Rational> matrix;
  std::vector<bool> observed;
  std::vector<std::int64_t> first_t;
  std::vector<std::string> first_cell;
  Report report;
};

template <typename Cells, typename Key, typename Next>
KernelCheck check_kernel(const FiniteSpace& space, const std::string& name, int t0, int t1, Cells cells,
                         std::function<std::pair<std::size_t, std::size_t>(int)> prefix, Index keys,
                         Index next_dim, Key key, Next next) {
  KernelCheck kc;
  kc.matrix = Mat<Rational>::Zero(next_dim, keys);
  kc.observed.assign(static_cast<std::size_t>(keys), false);
  kc.first_t.assign(static_cast<std::size_t>(keys), -1);
  kc.first_cell.assign(static_cast<std::size_t>(keys), "");
  for (int t = t0; t <= t1; ++t) {
    const Partition p = cells(t);
    const auto [xs, ys] = prefix(t);
    const auto laws = cell_laws(space, p, next_dim, [&](const FiniteSpace::Atom& a) { return next(a, t); });
    CheckResult row{name, t, true, "", "", ""};
    for (const auto& cl : laws) {
      if (cl.mass == 0) continue;
      const auto k = static_cast<std::size_t>(key(space.atom(cl.rep), t));
      const Vec<Rational> law = cl.law();
      const std::string here = path_witness(space, cl.rep, xs, ys);
      if (!kc.observed[k]) {
        kc.observed[k] = true;
        kc.matrix.col(static_cast<Index>(k)) = law;
        kc.first_t[k] = t;
        kc.first_cell[k] = here;
      } else if (law != kc.matrix.col(static_cast<Index>(k))) {
        if (row.pass) {
          row.pass = false;
          row.witness = here + " vs " + kc.first_cell[k] + " (t=" + std::to_string(kc.first_t[k]) + ")";
          row.lhs = format_vector(law);
          row.rhs = format_vector(kc.matrix.col(static_cast<Index>(k)));
        }
      }
    }
    kc.pass = kc.pass && row.pass;
    kc.report.checks.push_back(std::move(row));
  }
  return kc;
}

Report compare_observed(const std::string& name, const Mat<Rational>& got, const std::vector<bool>& observed,
                        const Mat<Rational>& expected) {
  CheckResult row{name, -1, true, "", "", ""};
  if (expected.rows() != got.rows() || expected.cols() != got.cols()) {
    row.pass = false;
    row.witness = "dimension mismatch";
  } else {
    for (Index j = 0; j < got.cols(); ++j) {
      if (!observed[static_cast<std::size_t>(j)]) continue;
      if (got.col(j) != expected.col(j)) {
        row.pass = false;
        row.witness = "column " + std::to_string(j + 1);
        row.lhs = format_vector(got.col(j));
        row.rhs = format_vector(expected.col(j));
        break;
      }
    }
  }
  return Report{{row}};
}

std::pair<std::size_t, std::size_t> f_prefix(int t) { return {count(t), count(t)}; }
std::pair<std::size_t, std::size_t> g_prefix(int t) { return {count(t), count(t - 1)}; }

int last_joint_time(const FiniteSpace& space) {
  return static_cast<int>(std::min(space.x_length(), space.y_length())) - 1;
}

/// Checks that columns keyed by (output, state) depend only on the state
/// and returns the per-state columns (the "bar" matrix) with their mask.
struct BarMatrix {
  bool pass = true;
  Mat<Rational> bar;
  std::vector<bool> observed;
  CheckResult row;
};

BarMatrix collapse_to_state(const std::string& name, const Mat<Rational>& mat, const std::vector<bool>& observed,
                            Index n, Index m) {
  BarMatrix out;
  out.row = CheckResult{name, -1, true, "", "", ""};
  out.bar = Mat<Rational>::Zero(mat.rows(), n);
  out.observed.assign(static_cast<std::size_t>(n), false);
  for (Index k = 0; k < m; ++k) {
    for (Index j = 0; j < n; ++j) {
      const Index col = joint_index(j, k, n);
      if (!observed[static_cast<std::size_t>(col)]) continue;
      if (!out.observed[static_cast<std::size_t>(j)]) {
        out.observed[static_cast<std::size_t>(j)] = true;
        out.bar.col(j) = mat.col(col);
      } else if (out.bar.col(j) != mat.col(col)) {
        out.pass = false;
        out.row.pass = false;
        out.row.witness = "column for (x=" + std::to_string(j + 1) + ", y=" + std::to_string(k + 1) +
                          ") differs from another output at the same state";
        out.row.lhs = format_vector(mat.col(col));
        out.row.rhs = format_vector(out.bar.col(j));
        return out;
      }
    }
  }
  return out;
}

/// Qbar = Delta(G') A' on observed state columns.
CheckResult check_q_form(const BarMatrix& qb, Index n, Index m) {
  CheckResult row{"q_form", -1, true, "", "", ""};
  const Mat<Rational> a = x_selector<Rational>(n, m) * qb.bar;
  Mat<Rational> g = Mat<Rational>::Zero(m, n);
  std::vector<bool> g_set(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    if (!qb.observed[static_cast<std::size_t>(j)]) continue;
    for (Index i = 0; i < n; ++i) {
      if (a(i, j) == 0) continue;
      Vec<Rational> ratio(m);
      for (Index k = 0; k < m; ++k) ratio(k) = qb.bar(joint_index(i, k, n), j) / a(i, j);
      if (!g_set[static_cast<std::size_t>(i)]) {
        g.col(i) = ratio;
        g_set[static_cast<std::size_t>(i)] = true;
      } else if (g.col(i) != ratio) {
        row.pass = false;
        row.witness = "output law of next state " + std::to_string(i + 1) + " depends on current state " +
                      std::to_string(j + 1);
        row.lhs = format_vector(ratio);
        row.rhs = format_vector(g.col(i));
        return row;
      }
    }
  }
  return row;
}

/// Rbar = (I (x) A') Delta(G') on observed state columns.
CheckResult check_r_form(const BarMatrix& rb, Index n, Index m) {
  CheckResult row{"r_form", -1, true, "", "", ""};
  const Mat<Rational> a = x_selector<Rational>(n, m) * rb.bar;
  const Mat<Rational> g = y_selector<Rational>(n, m) * rb.bar;
  for (Index j = 0; j < n; ++j) {
    if (!rb.observed[static_cast<std::size_t>(j)]) continue;
    for (Index k = 0; k < m; ++k) {
      for (Index i = 0; i < n; ++i) {
        const Rational expect = a(i, j) * g(k, j);
        if (rb.bar(joint_index(i, k, n), j) != expect) {
          row.pass = false;
          row.witness = "state " + std::to_string(j + 1) + ": output and next state are dependent";
          row.lhs = format_rational(rb.bar(joint_index(i, k, n), j));
          row.rhs = format_rational(expect);
          return row;
        }
      }
    }
  }
  return row;
}

/// Law of (X, Y) equals the HMC law with pooled (A', G', p0') extracted from
/// the space itself.
CheckResult check_hmc_law(const FiniteSpace& space) {
  CheckResult row{"hmc_law", -1, true, "", "", ""};
  const Index n = space.n();
  const Index m = space.m();
  const int horizon = static_cast<int>(space.x_length()) - 1;
  Vec<Rational> p0 = Vec<Rational>::Zero(n);
  Mat<Rational> gs = Mat<Rational>::Zero(m, n);
  Vec<Rational> gmass = Vec<Rational>::Zero(n);
  Mat<Rational> as = Mat<Rational>::Zero(n, n);
  Vec<Rational> amass = Vec<Rational>::Zero(n);
  for (const auto& atom : space.atoms()) {
    if (atom.weight == 0) continue;
    p0(atom.x[0]) += atom.weight;
    for (int t = 0; t <= horizon; ++t) {
      gs(atom.y[static_cast<std::size_t>(t)], atom.x[static_cast<std::size_t>(t)]) += atom.weight;
      gmass(atom.x[static_cast<std::size_t>(t)]) += atom.weight;
      if (t < horizon) {
        as(atom.x[static_cast<std::size_t>(t) + 1], atom.x[static_cast<std::size_t>(t)]) += atom.weight;
        amass(atom.x[static_cast<std::size_t>(t)]) += atom.weight;
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (gmass(i) != 0) gs.col(i) /= gmass(i);
    else gs(0, i) = 1;
    if (amass(i) != 0) as.col(i) /= amass(i);
    else as(i, i) = 1;
  }
  std::map<std::pair<std::vector<int>, std::vector<int>>, Rational> target;
  for (auto& atom : enumerate_hmc_atoms(as, gs, p0, horizon)) target[{atom.x, atom.y}] = atom.weight;
  std::map<std::pair<std::vector<int>, std::vector<int>>, Rational> actual;
  for (const auto& atom : space.atoms())
    if (atom.weight != 0) actual[{atom.x, atom.y}] += atom.weight;
  for (const auto& [label, w] : actual) {
    auto it = target.find(label);
    const Rational expect = it == target.end() ? Rational(0) : it->second;
    if (w != expect) {
      row.pass = false;
      row.witness = format_path(FiniteSpace::Atom{label.first, label.second, w}, label.first.size(),
                                label.second.size());
      row.lhs = format_rational(w);
      row.rhs = format_rational(expect);
      return row;
    }
  }
  if (target.size() != actual.size()) {
    row.pass = false;
    row.witness = "HMC law charges a path the space does not contain";
  }
  return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteSpace / Partition.

FiniteSpace::FiniteSpace(std::vector<Atom> atoms, int n, int m) : atoms_(std::move(atoms)), n_(n), m_(m) {
  if (atoms_.empty()) throw ValidationError("atoms", "", "space has no atoms");
  Rational total = 0;
  x_len_ = std::numeric_limits<std::size_t>::max();
  y_len_ = std::numeric_limits<std::size_t>::max();
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    if (atoms_[a].weight < 0) throw ValidationError("weight", std::to_string(a), "negative");
    total += atoms_[a].weight;
    x_len_ = std::min(x_len_, atoms_[a].x.size());
    y_len_ = std::min(y_len_, atoms_[a].y.size());
  }
  if (total != 1) throw ValidationError("weight", "", "weights sum to " + format_rational(total));
}

FiniteSpace FiniteSpace::abstract(const std::vector<Rational>& weights) {
  std::vector<Atom> atoms;
  for (const auto& w : weights) atoms.push_back(Atom{{}, {}, w});
  return FiniteSpace(std::move(atoms));
}

Partition Partition::from_cells(std::vector<std::vector<std::size_t>> cells, std::size_t atoms) {
  std::vector<std::size_t> keys(atoms, std::numeric_limits<std::size_t>::max());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].empty()) throw ValidationError("cells", std::to_string(c), "empty cell");
    for (auto a : cells[c]) {
      if (a >= atoms) throw ValidationError("cells", std::to_string(c), "atom out of range");
      if (keys[a] != std::numeric_limits<std::size_t>::max())
        throw ValidationError("cells", std::to_string(c), "cells overlap");
      keys[a] = c;
    }
  }
  for (std::size_t a = 0; a < atoms; ++a)
    if (keys[a] == std::numeric_limits<std::size_t>::max())
      throw ValidationError("cells", "", "atom " + std::to_string(a) + " not covered");
  return from_keys(keys);
}

Partition Partition::trivial(std::size_t atoms) { return from_keys(std::vector<int>(atoms, 0)); }

Partition Partition::finest(std::size_t atoms) {
  std::vector<std::size_t> keys(atoms);
  for (std::size_t a = 0; a < atoms; ++a) keys[a] = a;
  return from_keys(keys);
}

Partition Partition::join(const Partition& a, const Partition& b) {
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  keys.reserve(a.atoms());
  for (std::size_t i = 0; i < a.atoms(); ++i) keys.emplace_back(a.cell_of(i), b.cell_of(i));
  return from_keys(keys);
}

// ---------------------------------------------------------------------------
// Enumeration.

std::uint64_t atom_budget() {
  if (const char* env = std::getenv("HMC_ATOM_BUDGET")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return 1'000'000;
}

FiniteSpace enumerate_hmc(const HmcModel<Rational>& model, int horizon, std::uint64_t budget) {
  require_horizon(horizon);
  const auto nm = static_cast<std::uint64_t>(model.n() * model.m());
  require_budget(saturating_pow(nm, horizon + 1), budget);
  return FiniteSpace(enumerate_hmc_atoms(model.A(), model.G(), model.p0(), horizon),
                     static_cast<int>(model.n()), static_cast<int>(model.m()));
}

FiniteSpace enumerate_sigma_p(const SigmaPModel<Rational>& model, int horizon, std::uint64_t budget) {
  require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const int m = static_cast<int>(model.m());
  require_budget(saturating_pow(static_cast<std::uint64_t>(n * m), horizon + 1), budget);
  const auto& qbar = model.stacked();
  auto atoms = enumerate_chain(
      n * m, horizon, [&](int z) { return model.q0()(z); },
      [&](int prev, int z) { return qbar(z, prev % n); },
      [n](int z, int, FiniteSpace::Atom& atom) {
        atom.x.push_back(z % n);
        atom.y.push_back(z / n);
      },
      horizon);
  return FiniteSpace(std::move(atoms), n, m);
}

FiniteSpace enumerate_sigma_s(const SigmaSModel<Rational>& model, int horizon, std::uint64_t budget) {
  require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const int m = static_cast<int>(model.m());
  require_budget(saturating_mul(saturating_pow(static_cast<std::uint64_t>(n), horizon + 1),
                                saturating_pow(static_cast<std::uint64_t>(m), horizon)),
                 budget);
  const auto& rbar = model.stacked();
  // Symbol 0 of the path is x_0 (encoded as a joint symbol with output 0);
  // later symbols w = y_{t-1} * n + x_t.
  auto atoms = enumerate_chain(
      n * m, horizon, [&](int w) { return w < n ? model.p0()(w) : Rational(0); },
      [&](int prev, int w) { return rbar(w, prev % n); },
      [n](int w, int step, FiniteSpace::Atom& atom) {
        if (step > 0) atom.y.push_back(w / n);
        atom.x.push_back(w % n);
      },
      horizon);
  return FiniteSpace(std::move(atoms), n, m);
}

FiniteSpace enumerate_joint(const JointChainModel<Rational>& model, int horizon, std::uint64_t budget) {
  require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const int m = static_cast<int>(model.m());
  require_budget(saturating_pow(static_cast<std::uint64_t>(n * m), horizon + 1), budget);
  auto atoms = enumerate_chain(
      n * m, horizon, [&](int z) { return model.q0()(z); },
      [&](int prev, int z) { return model.Q()(z, prev); },
      [n](int z, int, FiniteSpace::Atom& atom) {
        atom.x.push_back(z % n);
        atom.y.push_back(z / n);
      },
      horizon);
  return FiniteSpace(std::move(atoms), n, m);
}

FiniteSpace marginalize(const FiniteSpace& space, std::size_t x_len, std::size_t y_len) {
  if (x_len > space.x_length() || y_len > space.y_length())
    throw ValidationError("marginalize", "", "prefix longer than the paths");
  std::map<std::pair<std::vector<int>, std::vector<int>>, Rational> merged;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> order;
  for (const auto& atom : space.atoms()) {
    std::pair<std::vector<int>, std::vector<int>> label{
        {atom.x.begin(), atom.x.begin() + static_cast<std::ptrdiff_t>(x_len)},
        {atom.y.begin(), atom.y.begin() + static_cast<std::ptrdiff_t>(y_len)}};
    auto [it, inserted] = merged.try_emplace(label, 0);
    if (inserted) order.push_back(label);
    it->second += atom.weight;
  }
  std::vector<FiniteSpace::Atom> atoms;
  atoms.reserve(order.size());
  for (auto& label : order) {
    const Rational w = merged[label];
    atoms.push_back(FiniteSpace::Atom{std::move(label.first), std::move(label.second), w});
  }
  return FiniteSpace(std::move(atoms), space.n(), space.m());
}

// ---------------------------------------------------------------------------
// Partitions and random vectors.

Partition partition_f(const FiniteSpace& space, int t) { return prefix_partition(space, count(t), count(t)); }
Partition partition_g(const FiniteSpace& space, int t) { return prefix_partition(space, count(t), count(t - 1)); }
Partition partition_fy(const FiniteSpace& space, int t) { return prefix_partition(space, 0, count(t)); }

Partition partition_x_at(const FiniteSpace& space, int t) {
  std::vector<int> keys;
  for (const auto& a : space.atoms()) keys.push_back(a.x.at(static_cast<std::size_t>(t)));
  return Partition::from_keys(keys);
}

Partition partition_y_at(const FiniteSpace& space, int t) {
  std::vector<int> keys;
  for (const auto& a : space.atoms()) keys.push_back(a.y.at(static_cast<std::size_t>(t)));
  return Partition::from_keys(keys);
}

namespace {
template <typename IndexFn>
RandVec one_hot(const FiniteSpace& space, Index dim, IndexFn index) {
  RandVec u = RandVec::Zero(static_cast<Index>(space.size()), dim);
  for (std::size_t a = 0; a < space.size(); ++a) u(static_cast<Index>(a), index(space.atom(a))) = 1;
  return u;
}
}  // namespace

RandVec state_indicator(const FiniteSpace& space, int t) {
  return one_hot(space, space.n(), [t](const FiniteSpace::Atom& a) { return a.x.at(static_cast<std::size_t>(t)); });
}

RandVec output_indicator(const FiniteSpace& space, int t) {
  return one_hot(space, space.m(), [t](const FiniteSpace::Atom& a) { return a.y.at(static_cast<std::size_t>(t)); });
}

RandVec joint_indicator(const FiniteSpace& space, int t) {
  const int n = space.n();
  return one_hot(space, space.n() * space.m(), [t, n](const FiniteSpace::Atom& a) {
    return joint_index(a.x.at(static_cast<std::size_t>(t)), a.y.at(static_cast<std::size_t>(t)), n);
  });
}

RandVec shifted_indicator(const FiniteSpace& space, int t) {
  const int n = space.n();
  return one_hot(space, space.n() * space.m(), [t, n](const FiniteSpace::Atom& a) {
    return joint_index(a.x.at(static_cast<std::size_t>(t)), a.y.at(static_cast<std::size_t>(t) - 1), n);
  });
}

Vec<Rational> expectation(const FiniteSpace& space, const RandVec& u) {
  Vec<Rational> out = Vec<Rational>::Zero(u.cols());
  for (std::size_t a = 0; a < space.size(); ++a) out += space.weight(a) * u.row(static_cast<Index>(a)).transpose();
  return out;
}

RandVec cond_exp(const FiniteSpace& space, const RandVec& u, const Partition& sigma) {
  if (static_cast<std::size_t>(u.rows()) != space.size() || sigma.atoms() != space.size())
    throw ValidationError("u", "", "random vector / partition does not match the space");
  RandVec out = RandVec::Zero(u.rows(), u.cols());
  for (std::size_t c = 0; c < sigma.size(); ++c) {
    Rational mass = 0;
    RowVec<Rational> sum = RowVec<Rational>::Zero(u.cols());
    for (auto a : sigma.cell(c)) {
      mass += space.weight(a);
      sum += space.weight(a) * u.row(static_cast<Index>(a));
    }
    if (mass == 0) continue;
    sum /= mass;
    for (auto a : sigma.cell(c)) out.row(static_cast<Index>(a)) = sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

void Report::append(const Report& other, const std::string& prefix) {
  for (auto c : other.checks) {
    c.check = prefix + c.check;
    checks.push_back(std::move(c));
  }
}

const CheckResult* Report::find(const std::string& check) const {
  for (const auto& c : checks)
    if (c.check == check) return &c;
  return nullptr;
}

std::string format_vector(const Vec<Rational>& v) {
  std::string s = "[";
  for (Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_rational(v(i));
  return s + "]";
}

std::string format_matrix(const Mat<Rational>& m) {
  std::string s = "[";
  for (Index i = 0; i < m.rows(); ++i) s += (i ? ", " : "") + format_vector(m.row(i).transpose());
  return s + "]";
}

std::string format_path(const FiniteSpace::Atom& atom, std::size_t x_len, std::size_t y_len) {
  std::ostringstream os;
  os << "x=(";
  for (std::size_t i = 0; i < std::min(x_len, atom.x.size()); ++i) os << (i ? "," : "") << atom.x[i] + 1;
  os << ") y=(";
  for (std::size_t i = 0; i < std::min(y_len, atom.y.size()); ++i) os << (i ? "," : "") << atom.y[i] + 1;
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Conditioning lemma.

Report lemma_a1_check(const FiniteSpace& space, const RandVec& u, const Partition& f0, const Partition& h) {
  const auto atoms = static_cast<Index>(space.size());
  const Index d = u.cols();

  // E_i[U | F0] evaluated on the reweighted space P_i = P( . | H_i).
  std::vector<RandVec> cond_i;
  std::vector<RandVec> indicator;
  for (std::size_t i = 0; i < h.size(); ++i) {
    RandVec ind = RandVec::Zero(atoms, 1);
    Rational mass = 0;
    for (auto a : h.cell(i)) {
      ind(static_cast<Index>(a), 0) = 1;
      mass += space.weight(a);
    }
    indicator.push_back(ind);
    if (mass == 0) {
      cond_i.push_back(RandVec::Zero(atoms, d));
      continue;
    }
    std::vector<FiniteSpace::Atom> reweighted = space.atoms();
    for (std::size_t a = 0; a < reweighted.size(); ++a)
      reweighted[a].weight = h.cell_of(a) == i ? space.weight(a) / mass : Rational(0);
    cond_i.push_back(cond_exp(FiniteSpace(std::move(reweighted), space.n(), space.m()), u, f0));
  }

  auto compare = [&](const std::string& name, const RandVec& lhs, const RandVec& rhs) {
    CheckResult row{name, -1, true, "", "", ""};
    for (Index a = 0; a < atoms; ++a) {
      if (lhs.row(a) != rhs.row(a)) {
        row.pass = false;
        row.witness = "atom " + std::to_string(a);
        row.lhs = format_vector(lhs.row(a).transpose());
        row.rhs = format_vector(rhs.row(a).transpose());
        break;
      }
    }
    return row;
  };

  Report report;
  // E[U | F0 v H] = sum_i E_i[U | F0] 1_{H_i}
  {
    const RandVec lhs = cond_exp(space, u, Partition::join(f0, h));
    RandVec rhs(atoms, d);
    for (Index a = 0; a < atoms; ++a) rhs.row(a) = cond_i[h.cell_of(static_cast<std::size_t>(a))].row(a);
    report.checks.push_back(compare("bayes", lhs, rhs));
  }
  // E[U | F0] = sum_i E_i[U | F0] E[1_{H_i} | F0]
  std::vector<RandVec> prob_h;
  for (std::size_t i = 0; i < h.size(); ++i) prob_h.push_back(cond_exp(space, indicator[i], f0));
  {
    const RandVec lhs = cond_exp(space, u, f0);
    RandVec rhs = RandVec::Zero(atoms, d);
    for (std::size_t i = 0; i < h.size(); ++i)
      for (Index a = 0; a < atoms; ++a) rhs.row(a) += prob_h[i](a, 0) * cond_i[i].row(a);
    report.checks.push_back(compare("bayes3", lhs, rhs));
  }
  // E[1_{H_j} U | F0] = E[1_{H_j} | F0] E_j[U | F0]
  for (std::size_t j = 0; j < h.size(); ++j) {
    RandVec masked = u;
    for (Index a = 0; a < atoms; ++a)
      if (h.cell_of(static_cast<std::size_t>(a)) != j) masked.row(a).setZero();
    const RandVec lhs = cond_exp(space, masked, f0);
    RandVec rhs(atoms, d);
    for (Index a = 0; a < atoms; ++a) rhs.row(a) = prob_h[j](a, 0) * cond_i[j].row(a);
    report.checks.push_back(compare("bayes2[" + std::to_string(j + 1) + "]", lhs, rhs));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Oracle posteriors.

std::map<std::vector<int>, Posterior> oracle_posteriors(const FiniteSpace& space, int t, PosteriorKind kind) {
  const auto ts = static_cast<std::size_t>(t);
  const std::size_t x_at = kind == PosteriorKind::filter ? ts : ts + 1;
  if (t < 0 || ts + 1 > space.y_length() || x_at + 1 > space.x_length())
    throw ValidationError("t", std::to_string(t), "beyond the enumerated horizon");
  std::map<std::vector<int>, Posterior> out;
  for (const auto& atom : space.atoms()) {
    if (atom.weight == 0) continue;
    std::vector<int> hist(atom.y.begin(), atom.y.begin() + static_cast<std::ptrdiff_t>(ts + 1));
    auto [it, inserted] = out.try_emplace(std::move(hist));
    if (inserted) {
      it->second.law = Vec<Rational>::Zero(space.n());
      it->second.history_prob = 0;
    }
    it->second.law(atom.x[x_at]) += atom.weight;
    it->second.history_prob += atom.weight;
  }
  for (auto& [hist, post] : out) post.law /= post.history_prob;
  return out;
}

// ---------------------------------------------------------------------------
// Structural verifiers.

Report verify_factorization(const FiniteSpace& space, const std::optional<Mat<Rational>>& k) {
  const Index n = space.n();
  const Index m = space.m();
  Mat<Rational> kmat = k ? *k : Mat<Rational>::Zero(m, n);
  std::vector<bool> known(static_cast<std::size_t>(n), k.has_value());
  std::vector<std::string> source(static_cast<std::size_t>(n), "model");
  Report report;
  for (int t = 0; t <= last_joint_time(space); ++t) {
    const Partition p = partition_f(space, t - 1);
    const auto z_laws = cell_laws(space, p, n * m, [t, n](const FiniteSpace::Atom& a) {
      return joint_index(a.x[static_cast<std::size_t>(t)], a.y[static_cast<std::size_t>(t)], n);
    });
    CheckResult row{"factorization", t, true, "", "", ""};
    for (const auto& cl : z_laws) {
      if (cl.mass == 0 || !row.pass) continue;
      const Vec<Rational> ez = cl.law();
      const Vec<Rational> ex = x_selector<Rational>(n, m) * ez;
      const std::string here = format_path(space.atom(cl.rep), count(t - 1), count(t - 1));
      for (Index i = 0; i < n && row.pass; ++i) {
        if (ex(i) == 0) continue;
        Vec<Rational> ratio(m);
        for (Index kk = 0; kk < m; ++kk) ratio(kk) = ez(joint_index(i, kk, n)) / ex(i);
        if (!known[static_cast<std::size_t>(i)]) {
          kmat.col(i) = ratio;
          known[static_cast<std::size_t>(i)] = true;
          source[static_cast<std::size_t>(i)] = here + " (t=" + std::to_string(t) + ")";
        }
      }
      const Vec<Rational> rhs = delta(kmat) * ex;
      if (ez != rhs) {
        row.pass = false;
        row.witness = here + " vs K from " + [&] {
          for (Index i = 0; i < n; ++i)
            if (ex(i) != 0) return source[static_cast<std::size_t>(i)];
          return std::string("model");
        }();
        row.lhs = format_vector(ez);
        row.rhs = format_vector(rhs);
      }
    }
    report.checks.push_back(std::move(row));
  }
  return report;
}

Report verify_splitting(const FiniteSpace& space) {
  const Index n = space.n();
  const Index m = space.m();
  Report report;
  const int last = std::min(static_cast<int>(space.y_length()) - 1, static_cast<int>(space.x_length()) - 2);
  for (int t = 0; t <= last; ++t) {
    const Partition p = partition_g(space, t);
    const auto w_laws = cell_laws(space, p, n * m, [t, n](const FiniteSpace::Atom& a) {
      return joint_index(a.x[static_cast<std::size_t>(t) + 1], a.y[static_cast<std::size_t>(t)], n);
    });
    const auto y_laws = cell_laws(space, p, m, [t](const FiniteSpace::Atom& a) { return a.y[static_cast<std::size_t>(t)]; });
    const auto x_laws =
        cell_laws(space, p, n, [t](const FiniteSpace::Atom& a) { return a.x[static_cast<std::size_t>(t) + 1]; });
    CheckResult row{"splitting", t, true, "", "", ""};
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (w_laws[c].mass == 0) continue;
      const Vec<Rational> lhs = w_laws[c].law();
      const Vec<Rational> rhs = kron(y_laws[c].law(), x_laws[c].law());
      if (lhs != rhs) {
        row.pass = false;
        row.witness = format_path(space.atom(w_laws[c].rep), count(t), count(t - 1));
        row.lhs = format_vector(lhs);
        row.rhs = format_vector(rhs);
        break;
      }
    }
    report.checks.push_back(std::move(row));
  }
  return report;
}

Report verify_output_properties(const FiniteSpace& space, const std::optional<Mat<Rational>>& g) {
  const Index n = space.n();
  const Index m = space.m();
  const int last = last_joint_time(space);
  Report report;
  for (int t = 0; t <= last; ++t) {
    const Partition gp = partition_g(space, t);
    const Partition xp = partition_x_at(space, t);
    const auto y_of = [t](const FiniteSpace::Atom& a) { return a.y[static_cast<std::size_t>(t)]; };
    const auto z_of = [t, n](const FiniteSpace::Atom& a) {
      return joint_index(a.x[static_cast<std::size_t>(t)], a.y[static_cast<std::size_t>(t)], n);
    };
    const auto y_given_g = cell_laws(space, gp, m, y_of);
    const auto z_given_g = cell_laws(space, gp, n * m, z_of);
    const auto y_given_x = cell_laws(space, xp, m, y_of);
    const auto z_given_x = cell_laws(space, xp, n * m, z_of);
    CheckResult out_row{"output_property", t, true, "", "", ""};
    CheckResult ext_row{"extended_output_property", t, true, "", "", ""};
    for (std::size_t c = 0; c < gp.size(); ++c) {
      if (y_given_g[c].mass == 0) continue;
      const std::size_t xc = xp.cell_of(y_given_g[c].rep);
      const std::string here = format_path(space.atom(y_given_g[c].rep), count(t), count(t - 1));
      if (out_row.pass && y_given_g[c].law() != y_given_x[xc].law()) {
        out_row.pass = false;
        out_row.witness = here;
        out_row.lhs = format_vector(y_given_g[c].law());
        out_row.rhs = format_vector(y_given_x[xc].law());
      }
      if (ext_row.pass && z_given_g[c].law() != z_given_x[xc].law()) {
        ext_row.pass = false;
        ext_row.witness = here;
        ext_row.lhs = format_vector(z_given_g[c].law());
        ext_row.rhs = format_vector(z_given_x[xc].law());
      }
    }
    report.checks.push_back(std::move(out_row));
    report.checks.push_back(std::move(ext_row));
  }

  // G(:, i) = law of Y_t given X_t = e_i, the same at every t.
  const auto gk = check_kernel(
      space, "output_law_time_invariant", 0, last, [&](int t) { return partition_x_at(space, t); },
      [](int t) { return std::pair<std::size_t, std::size_t>{count(t), count(t)}; }, n, m,
      [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
      [](const FiniteSpace::Atom& a, int t) { return a.y[static_cast<std::size_t>(t)]; });
  report.append(gk.report);
  // B(:, i) = law of Z_t given X_t = e_i.
  const auto bk = check_kernel(
      space, "extended_output_law_time_invariant", 0, last, [&](int t) { return partition_x_at(space, t); },
      [](int t) { return std::pair<std::size_t, std::size_t>{count(t), count(t)}; }, n, n * m,
      [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
      [n](const FiniteSpace::Atom& a, int t) {
        return joint_index(a.x[static_cast<std::size_t>(t)], a.y[static_cast<std::size_t>(t)], n);
      });
  report.append(bk.report);
  report.append(compare_observed("B_equals_Delta_G", bk.matrix, bk.observed, delta(gk.matrix)));
  if (g) report.append(compare_observed("G_matches_model", gk.matrix, gk.observed, *g));
  return report;
}

MarkovResult verify_markov(const FiniteSpace& space, MarkovKind kind, const std::optional<Mat<Rational>>& expected) {
  const Index n = space.n();
  const Index m = space.m();
  const int xlast = static_cast<int>(space.x_length()) - 1;
  const int ylast = static_cast<int>(space.y_length()) - 1;
  KernelCheck kc;
  switch (kind) {
    case MarkovKind::z_in_f:
      kc = check_kernel(
          space, "z_markov_in_f", 0, std::min(xlast, ylast) - 1, [&](int t) { return partition_f(space, t); },
          f_prefix, n * m, n * m,
          [n](const FiniteSpace::Atom& a, int t) {
            return joint_index(a.x[static_cast<std::size_t>(t)], a.y[static_cast<std::size_t>(t)], n);
          },
          [n](const FiniteSpace::Atom& a, int t) {
            return joint_index(a.x[static_cast<std::size_t>(t) + 1], a.y[static_cast<std::size_t>(t) + 1], n);
          });
      break;
    case MarkovKind::w_in_g:
      kc = check_kernel(
          space, "w_markov_in_g", 1, std::min(xlast - 1, ylast), [&](int t) { return partition_g(space, t); },
          g_prefix, n * m, n * m,
          [n](const FiniteSpace::Atom& a, int t) {
            return joint_index(a.x[static_cast<std::size_t>(t)], a.y[static_cast<std::size_t>(t) - 1], n);
          },
          [n](const FiniteSpace::Atom& a, int t) {
            return joint_index(a.x[static_cast<std::size_t>(t) + 1], a.y[static_cast<std::size_t>(t)], n);
          });
      break;
    case MarkovKind::x_in_f:
      kc = check_kernel(
          space, "x_markov_in_f", 0, std::min(xlast - 1, ylast), [&](int t) { return partition_f(space, t); },
          f_prefix, n, n, [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
          [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t) + 1]; });
      break;
    case MarkovKind::x_in_g:
      kc = check_kernel(
          space, "x_markov_in_g", 0, std::min(xlast - 1, ylast + 1), [&](int t) { return partition_g(space, t); },
          g_prefix, n, n, [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
          [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t) + 1]; });
      break;
  }
  MarkovResult out;
  out.markov = kc.pass;
  out.matrix = std::move(kc.matrix);
  out.observed = std::move(kc.observed);
  out.report = std::move(kc.report);
  if (expected) out.report.append(compare_observed("matrix_matches_expected", out.matrix, out.observed, *expected));
  return out;
}

Report verify_sigma_p_membership(const FiniteSpace& space) {
  const Index n = space.n();
  const Index m = space.m();
  const int last = std::min(static_cast<int>(space.x_length()), static_cast<int>(space.y_length())) - 2;
  return check_kernel(
             space, "sigma_p_membership", 0, last, [&](int t) { return partition_f(space, t); }, f_prefix, n,
             n * m, [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
             [n](const FiniteSpace::Atom& a, int t) {
               return joint_index(a.x[static_cast<std::size_t>(t) + 1], a.y[static_cast<std::size_t>(t) + 1], n);
             })
      .report;
}

Report verify_sigma_s_membership(const FiniteSpace& space) {
  const Index n = space.n();
  const Index m = space.m();
  const int last = std::min(static_cast<int>(space.x_length()) - 2, static_cast<int>(space.y_length()) - 1);
  return check_kernel(
             space, "sigma_s_membership", 0, last, [&](int t) { return partition_g(space, t); }, g_prefix, n,
             n * m, [](const FiniteSpace::Atom& a, int t) { return a.x[static_cast<std::size_t>(t)]; },
             [n](const FiniteSpace::Atom& a, int t) {
               return joint_index(a.x[static_cast<std::size_t>(t) + 1], a.y[static_cast<std::size_t>(t)], n);
             })
      .report;
}

EquivalenceReport theorem_3_5_suite(const FiniteSpace& space) {
  if (space.x_length() == 0 || space.x_length() != space.y_length())
    throw ValidationError("space", "", "needs x and y paths of equal length");
  const Index n = space.n();
  const Index m = space.m();
  EquivalenceReport r;

  const auto x_f = verify_markov(space, MarkovKind::x_in_f);
  const auto fact = verify_factorization(space);
  r.a = x_f.markov && fact.passed();
  r.report.append(x_f.report, "a.");
  r.report.append(fact, "a.");

  const auto x_g = verify_markov(space, MarkovKind::x_in_g);
  const auto split = verify_splitting(space);
  r.b = x_g.markov && split.passed();
  r.report.append(x_g.report, "b.");
  r.report.append(split, "b.");

  const auto z_f = verify_markov(space, MarkovKind::z_in_f);
  r.report.append(z_f.report, "c.");
  r.c = z_f.markov;
  if (z_f.markov) {
    const auto qb = collapse_to_state("q_depends_on_state_only", z_f.matrix, z_f.observed, n, m);
    r.report.checks.push_back(qb.row);
    r.report.checks.back().check = "c." + qb.row.check;
    r.c = qb.pass;
    if (qb.pass) {
      auto row = check_q_form(qb, n, m);
      row.check = "c." + row.check;
      r.c = row.pass;
      r.report.checks.push_back(std::move(row));
    }
  }

  const auto w_g = verify_markov(space, MarkovKind::w_in_g);
  r.report.append(w_g.report, "d.");
  r.d = w_g.markov;
  if (w_g.markov) {
    const auto rb = collapse_to_state("r_depends_on_state_only", w_g.matrix, w_g.observed, n, m);
    r.report.checks.push_back(rb.row);
    r.report.checks.back().check = "d." + rb.row.check;
    r.d = rb.pass;
    if (rb.pass) {
      auto row = check_r_form(rb, n, m);
      row.check = "d." + row.check;
      r.d = row.pass;
      r.report.checks.push_back(std::move(row));
    }
  }

  auto law = check_hmc_law(space);
  r.e = law.pass;
  law.check = "e." + law.check;
  r.report.checks.push_back(std::move(law));

  CheckResult agree{"clauses_agree", -1, r.agree(), "", "", ""};
  if (!agree.pass) {
    agree.witness = std::string("a=") + (r.a ? "1" : "0") + " b=" + (r.b ? "1" : "0") + " c=" + (r.c ? "1" : "0") +
                    " d=" + (r.d ? "1" : "0") + " e=" + (r.e ? "1" : "0");
  }
  r.report.checks.push_back(std::move(agree));
  return r;
}

EquivalenceReport theorem_3_5_suite(const HmcModel<Rational>& model, int horizon, std::uint64_t budget) {
  const FiniteSpace space = enumerate_hmc(model, horizon, budget);
  EquivalenceReport r = theorem_3_5_suite(space);
  const auto z_f = verify_markov(space, MarkovKind::z_in_f, build_q(model));
  const auto w_g = verify_markov(space, MarkovKind::w_in_g, build_r(model));
  if (const auto* c = z_f.report.find("matrix_matches_expected")) {
    auto row = *c;
    row.check = "c.matrix_equals_build_q";
    r.c = r.c && row.pass;
    r.report.checks.push_back(std::move(row));
  }
  if (const auto* c = w_g.report.find("matrix_matches_expected")) {
    auto row = *c;
    row.check = "d.matrix_equals_build_r";
    r.d = r.d && row.pass;
    r.report.checks.push_back(std::move(row));
  }
  for (auto& row : r.report.checks)
    if (row.check == "clauses_agree") row.pass = r.agree();
  return r;
}

}  // namespace hmcfs
