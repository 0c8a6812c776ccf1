#include "idp/rng.hpp"

#include <algorithm>
#include <cmath>

#include "idp/errors.hpp"

namespace idp {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  gen_.seed(seq);
}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform01() {
  // 53-bit mantissa, in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0)) raise(Errc::invalid_input, "exponential rate must be positive");
  return -std::log1p(-uniform01()) / rate;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) raise(Errc::invalid_input, "empty range");
  // Rejection sampling on the top bits, unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

int Rng::binomial(int n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0) raise(Errc::invalid_input, "bad binomial parameters");
  int hits = 0;
  for (int k = 0; k < n; ++k)
    if (uniform01() < p) ++hits;
  return hits;
}

std::vector<int> Rng::multinomial_equal(int total, int bins) {
  if (total < 0 || bins < 1) raise(Errc::invalid_input, "bad multinomial parameters");
  std::vector<int> counts(bins, 0);
  int remaining = total;
  for (int b = 0; b < bins - 1 && remaining > 0; ++b) {
    const int c = binomial(remaining, 1.0 / static_cast<double>(bins - b));
    counts[b] = c;
    remaining -= c;
  }
  counts[bins - 1] += remaining;
  return counts;
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k > n || k < 0) raise(Errc::invalid_input, "sample size exceeds population");
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace idp
