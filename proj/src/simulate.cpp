#include "hmcfs/simulate.hpp"

namespace hmcfs {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngState::RngState(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t RngState::operator()() noexcept {
  return mix64(key_ + (++counter_) * kGolden);
}

double RngState::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

int sample_categorical(std::span<const double> probs, RngState& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  // Rounding left the cumulative sum just below u.
  return last_positive;
}

EmpiricalKernel empirical_kernel(std::span<const PathSample> samples, int n, int m) {
  const int nm = n * m;
  Mat<double> counts = Mat<double>::Zero(nm, nm);
  EmpiricalKernel out;
  for (const auto& s : samples) {
    const std::size_t len = std::min(s.x.size(), s.y.size());
    for (std::size_t t = 0; t + 1 < len; ++t) {
      const auto from = joint_index(s.x[t], s.y[t], n);
      const auto to = joint_index(s.x[t + 1], s.y[t + 1], n);
      counts(to, from) += 1.0;
      ++out.transitions;
    }
  }
  if (out.transitions == 0) throw Error("empirical_kernel: no transitions in the samples");
  out.kernel = Mat<double>::Zero(nm, nm);
  out.visited.assign(static_cast<std::size_t>(nm), false);
  for (int j = 0; j < nm; ++j) {
    const double total = counts.col(j).sum();
    if (total > 0.0) {
      out.kernel.col(j) = counts.col(j) / total;
      out.visited[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

}  // namespace hmcfs
