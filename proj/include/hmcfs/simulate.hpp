// Seeded trajectory sampling for the three model classes.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hmcfs/models.hpp"

namespace hmcfs {

/// Counter-based generator ("splitmix64-ctr"): output k of stream s under seed
/// S is a fixed function of (S, s, k), so any replicate can be regenerated
/// independently of how replicates are scheduled.
class RngState {
 public:
  using result_type = std::uint64_t;
  static constexpr const char* algorithm = "splitmix64-ctr";

  explicit RngState(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  /// Independent stream for replicate `stream` under the same seed.
  RngState derive(std::uint64_t stream) const noexcept { return RngState(seed_, stream); }

  std::uint64_t operator()() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Draws an index from the (possibly unnormalized by rounding) distribution
/// `probs`. Zero-probability outcomes are never returned.
int sample_categorical(std::span<const double> probs, RngState& rng);

/// One realized trajectory. Indices are 0-based. For HMC and Sigma_P paths
/// x and y both have length T+1; for Sigma_S paths y has length T.
struct PathSample {
  std::vector<int> x;
  std::vector<int> y;
  /// Optional record of the random maps: channel[t][i] = h_t(e_i).
  std::vector<std::vector<int>> channel;
};

namespace detail {
inline void require_horizon(std::int64_t horizon) {
  if (horizon < 0) throw ValidationError("horizon", "", "must be >= 0");
}

template <typename M>
std::vector<std::vector<double>> columns_as_double(const Eigen::MatrixBase<M>& m) {
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      cols[static_cast<std::size_t>(j)].push_back(scalar_cast<double>(m(i, j)));
  return cols;
}
}  // namespace detail

/// Samples x_0 ~ p0, x_t ~ A.col(x_{t-1}); at every t a full random map
/// h_t : E -> F is drawn (each column independently from the matching column
/// of G, independent of X) and y_t = h_t(x_t).
template <typename T>
PathSample sample_hmc(const HmcModel<T>& model, std::int64_t horizon, RngState& rng,
                      bool record_channel = false) {
  detail::require_horizon(horizon);
  const auto a = detail::columns_as_double(model.A());
  const auto g = detail::columns_as_double(model.G());
  const auto p0 = detail::columns_as_double(model.p0());
  PathSample s;
  const auto len = static_cast<std::size_t>(horizon) + 1;
  s.x.reserve(len);
  s.y.reserve(len);
  std::vector<int> h(static_cast<std::size_t>(model.n()));
  for (std::size_t t = 0; t < len; ++t) {
    const int x = t == 0 ? sample_categorical(p0[0], rng)
                         : sample_categorical(a[static_cast<std::size_t>(s.x.back())], rng);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = sample_categorical(g[i], rng);
    s.x.push_back(x);
    s.y.push_back(h[static_cast<std::size_t>(x)]);
    if (record_channel) s.channel.push_back(h);
  }
  return s;
}

/// (x_0, y_0) ~ q0, then (x_{t+1}, y_{t+1}) ~ Qbar.col(x_t) in one joint draw.
template <typename T>
PathSample sample_sigma_p(const SigmaPModel<T>& model, std::int64_t horizon, RngState& rng) {
  detail::require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const auto qbar = detail::columns_as_double(model.stacked());
  const auto q0 = detail::columns_as_double(model.q0());
  PathSample s;
  for (std::int64_t t = 0; t <= horizon; ++t) {
    const int z = t == 0 ? sample_categorical(q0[0], rng)
                         : sample_categorical(qbar[static_cast<std::size_t>(s.x.back())], rng);
    s.x.push_back(z % n);
    s.y.push_back(z / n);
  }
  return s;
}

/// x_0 ~ p0, then (y_t, x_{t+1}) ~ Rbar.col(x_t) in one joint draw.
template <typename T>
PathSample sample_sigma_s(const SigmaSModel<T>& model, std::int64_t horizon, RngState& rng) {
  detail::require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const auto rbar = detail::columns_as_double(model.stacked());
  const auto p0 = detail::columns_as_double(model.p0());
  PathSample s;
  s.x.push_back(sample_categorical(p0[0], rng));
  for (std::int64_t t = 0; t < horizon; ++t) {
    const int w = sample_categorical(rbar[static_cast<std::size_t>(s.x.back())], rng);
    s.y.push_back(w / n);
    s.x.push_back(w % n);
  }
  return s;
}

/// (x_0, y_0) ~ q0, then z_{t+1} ~ Q.col(z_t).
template <typename T>
PathSample sample_joint_chain(const JointChainModel<T>& model, std::int64_t horizon, RngState& rng) {
  detail::require_horizon(horizon);
  const int n = static_cast<int>(model.n());
  const auto q = detail::columns_as_double(model.Q());
  const auto q0 = detail::columns_as_double(model.q0());
  PathSample s;
  int z = sample_categorical(q0[0], rng);
  for (std::int64_t t = 0; t <= horizon; ++t) {
    if (t > 0) z = sample_categorical(q[static_cast<std::size_t>(z)], rng);
    s.x.push_back(z % n);
    s.y.push_back(z / n);
  }
  return s;
}

struct EmpiricalKernel {
  /// Column-normalized counts of Z transitions; unvisited columns are zero.
  Mat<double> kernel;
  std::vector<bool> visited;
  std::uint64_t transitions = 0;
};

/// Estimates the Z-transition matrix from the (x_t, y_t) -> (x_{t+1}, y_{t+1})
/// pairs present in the samples. Throws Error when no transition exists.
EmpiricalKernel empirical_kernel(std::span<const PathSample> samples, int n, int m);

}  // namespace hmcfs
