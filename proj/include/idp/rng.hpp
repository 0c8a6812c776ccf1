#ifndef IDP_RNG_HPP
#define IDP_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace idp {

// Seeded random source with the handful of samplers the simulators need.
// All distributions are implemented in-house so that a (seed, stream) pair
// produces the same draws on every platform and standard library.
// Replicates get independent streams via the stream id.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform01();                       // [0, 1)
  double exponential(double rate);          // rate > 0
  std::uint64_t below(std::uint64_t n);     // uniform in {0, ..., n-1}
  int binomial(int n, double p);
  // total items into `bins` equally likely cells.
  std::vector<int> multinomial_equal(int total, int bins);
  // k distinct values from {0, ..., n-1}.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 gen_;
};

}  // namespace idp

#endif
