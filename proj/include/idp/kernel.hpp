#ifndef IDP_KERNEL_HPP
#define IDP_KERNEL_HPP

#include <complex>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

namespace idp::kernel {

// Grid for inverting the generating function on the complex unit circle.
struct KernelConfig {
  int n_grid = 2048;        // evaluation points, power of two
  double clamp_floor = 0.0; // lower clamp applied to inverted coefficients

  void validate() const;
};

// One row of the transition matrix: probs[j] = P(X(t)=j | X(0)=from_state)
// for the constant-rate process with immigration alpha and clearance mu.
struct TransitionRow {
  int from_state = 0;
  double elapsed = 0;
  double alpha = 0;
  double mu = 0;
  std::vector<double> probs;
  double min_raw = 0;  // smallest coefficient before clamping
};

// Generating function E[s^{X(t)} | X(0)=i] for constant rates, evaluated
// anywhere on the closed unit disk.
std::complex<double> pgf_eval(int i, std::complex<double> s, double t, double alpha, double mu);

// Full transition row recovered by evaluating the generating function on an
// n_grid-point circle and inverting with an FFT. If probability mass leaks
// to the top of the grid the computation is retried once on a doubled grid,
// then fails with aliasing-risk.
TransitionRow transition_row(int i, double t, double alpha, double mu,
                             const KernelConfig& cfg = {});

// Shared machinery for repeated transition-probability queries at a fixed
// (mu, elapsed) and varying (from, to, alpha), as the likelihood needs: the
// circle-grid factors that depend only on (mu, elapsed) are computed once,
// per-alpha spectra and per-state powers are cached, and single coefficients
// are extracted with a direct conjugate-symmetric inverse-transform sum.
//
// Not safe for concurrent use; build one engine per thread.
class TransitionEngine {
 public:
  TransitionEngine(double mu, double elapsed, KernelConfig cfg = {});
  ~TransitionEngine();
  TransitionEngine(TransitionEngine&&) noexcept;
  TransitionEngine& operator=(TransitionEngine&&) noexcept;

  // Clamped transition probability P_{from,to}(elapsed) under immigration
  // rate alpha. Throws state-overflow when a state does not fit the grid and
  // aliasing-risk when doubling the grid once still leaves mass at the top.
  double prob(int from, int to, double alpha);

  // Census-proportional fast path: immigration rate base_alpha * census with
  // integer census >= 1. Equal to prob(from, to, base_alpha * census) up to
  // rounding, but reuses one base spectrum across every census value via
  // binary powering, which is what makes whole-series likelihoods cheap.
  double prob_scaled(int from, int to, double base_alpha, int census);

  TransitionRow row(int from, double alpha);

  // Re-targets the engine at a new clearance rate (same elapsed time and
  // grid), recycling the internal buffers; much cheaper than rebuilding the
  // engine inside an optimizer loop.
  void rebind(double mu);

  double mu() const;
  double elapsed() const;
  int grid_size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Smallest clearance rate the closed-form generating function is evaluated
// at; below it the alpha/mu factor is numerically unstable and the kernel
// signals degenerate-rate instead.
inline constexpr double kMuFloor = 1e-8;

// Mass allowed at the top grid index before a row is considered aliased.
inline constexpr double kAliasTol = 1e-10;

}  // namespace idp::kernel

#endif
