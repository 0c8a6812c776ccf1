#include "idp/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "idp/errors.hpp"

namespace idp::kernel {

namespace {

using cplx = std::complex<double>;

// e^{2*pi*i*k/n} for k = 0..n-1, built once per grid size.
struct CircleTable {
  int n = 0;
  std::vector<cplx> unit;
};

const CircleTable& circle_table(int n) {
  static std::mutex guard;
  static std::map<int, std::unique_ptr<CircleTable>> tables;
  std::lock_guard<std::mutex> lock(guard);
  auto& slot = tables[n];
  if (!slot) {
    slot = std::make_unique<CircleTable>();
    slot->n = n;
    slot->unit.resize(n);
    for (int k = 0; k < n; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / n;
      slot->unit[k] = std::polar(1.0, angle);
    }
  }
  return *slot;
}

// In-place radix-2 transform: a[j] <- sum_k a[k] * e^{sign*2*pi*i*jk/n}.
void fft(std::vector<cplx>& a, int sign, const CircleTable& tbl) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const size_t stride = n / len;
    for (size_t base = 0; base < n; base += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        cplx w = tbl.unit[k * stride];
        if (sign < 0) w = std::conj(w);
        const cplx u = a[base + k];
        const cplx v = a[base + k + len / 2] * w;
        a[base + k] = u + v;
        a[base + k + len / 2] = u - v;
      }
    }
  }
}

cplx pow_int(cplx base, int exponent) {
  cplx result{1.0, 0.0};
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

std::uint64_t key_bits(double alpha) { return std::bit_cast<std::uint64_t>(alpha); }

struct PairKey {
  std::uint64_t alpha_bits;
  int state;
  bool operator==(const PairKey&) const = default;
};
struct PairHash {
  size_t operator()(const PairKey& k) const {
    std::uint64_t h = k.alpha_bits * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(k.state) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};

struct TripleKey {
  std::uint64_t alpha_bits;
  int from;
  int to;
  bool operator==(const TripleKey&) const = default;
};
struct TripleHash {
  size_t operator()(const TripleKey& k) const {
    std::uint64_t h = k.alpha_bits * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(k.from) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= static_cast<std::uint64_t>(k.to) + (h << 13) + (h >> 7);
    return static_cast<size_t>(h);
  }
};

constexpr int kIncrementalPowerCap = 512;

}  // namespace

void KernelConfig::validate() const {
  if (n_grid < 2 || !std::has_single_bit(static_cast<unsigned>(n_grid)))
    raise(Errc::bad_config, "n_grid must be a power of two, at least 2");
  if (!(clamp_floor >= 0.0))
    raise(Errc::bad_config, "clamp_floor must be nonnegative");
}

std::complex<double> pgf_eval(int i, std::complex<double> s, double t, double alpha, double mu) {
  if (i < 0) raise(Errc::invalid_input, "initial state must be nonnegative");
  if (std::abs(s) > 1.0 + 1e-12) raise(Errc::invalid_input, "s must lie on the closed unit disk");
  if (!(t > 0) || !std::isfinite(t)) raise(Errc::invalid_input, "elapsed time must be positive");
  if (!(alpha > 0) || !std::isfinite(alpha))
    raise(Errc::invalid_input, "alpha must be positive and finite");
  if (!(mu >= kMuFloor) || !std::isfinite(mu))
    raise(Errc::degenerate_rate, "mu below numerical floor");

  const double decay = std::exp(-mu * t);
  const cplx immigration = alpha * (1.0 - s) * (decay - 1.0) / mu;
  const cplx survivors = 1.0 + (s - 1.0) * decay;
  return std::exp(immigration) * pow_int(survivors, i);
}

struct TransitionEngine::Impl {
  double mu = 0;
  double elapsed = 0;
  KernelConfig cfg;

  // One resolution of the circle grid plus everything cached on it.
  struct Level {
    int n = 0;
    int half = 0;
    const CircleTable* circle = nullptr;
    std::vector<cplx> immig_arg;  // (1-s_k)(decay-1)/mu,   k = 0..half
    std::vector<cplx> survive;    // 1+(s_k-1)decay,        k = 0..half
    std::unordered_map<std::uint64_t, std::vector<cplx>> immig_spectrum;
    std::vector<std::vector<cplx>> state_power;  // survive^i for small i
    int state_power_valid = 0;                   // powers [0, valid) are current
    std::unordered_map<int, std::vector<cplx>> state_power_big;
    std::vector<std::vector<cplx>> retired;      // capacity recycled across rebinds

    // exp(base * immig_arg) raised to integer census values by binary
    // powering, one family per base rate.
    struct ScaledFamily {
      std::vector<std::vector<cplx>> squares;  // squares[b][k] = U[k]^(2^b)
      std::unordered_map<int, std::vector<cplx>> by_census;
    };
    std::unordered_map<std::uint64_t, ScaledFamily> scaled;

    void init(int grid_n, double mu_, double elapsed_) {
      n = grid_n;
      half = grid_n / 2;
      circle = &circle_table(grid_n);
      immig_arg.resize(half + 1);
      survive.resize(half + 1);
      if (state_power.empty())
        state_power.push_back(std::vector<cplx>(half + 1, cplx{1.0, 0.0}));
      rebind(mu_, elapsed_);
    }

    // Re-targets the grid factors at a new clearance rate, recycling every
    // spectrum buffer instead of freeing it.
    void rebind(double mu_, double elapsed_) {
      const double decay = std::exp(-mu_ * elapsed_);
      for (int k = 0; k <= half; ++k) {
        const cplx s = circle->unit[k];
        immig_arg[k] = (1.0 - s) * (decay - 1.0) / mu_;
        survive[k] = 1.0 + (s - 1.0) * decay;
      }
      state_power_valid = 1;  // the zeroth power is all ones, rate-free
      for (auto& [key, spectrum] : immig_spectrum) retired.push_back(std::move(spectrum));
      immig_spectrum.clear();
      for (auto& [key, family] : scaled) {
        for (auto& square : family.squares) retired.push_back(std::move(square));
        for (auto& [census, spectrum] : family.by_census)
          retired.push_back(std::move(spectrum));
      }
      scaled.clear();
      for (auto& [key, spectrum] : state_power_big) retired.push_back(std::move(spectrum));
      state_power_big.clear();
    }

    std::vector<cplx> acquire() {
      if (retired.empty()) return std::vector<cplx>(half + 1);
      std::vector<cplx> v = std::move(retired.back());
      retired.pop_back();
      v.resize(half + 1);
      return v;
    }

    const std::vector<cplx>& immigration_spectrum(double alpha) {
      auto [it, inserted] = immig_spectrum.try_emplace(key_bits(alpha));
      if (inserted) {
        it->second = acquire();
        for (int k = 0; k <= half; ++k) it->second[k] = std::exp(alpha * immig_arg[k]);
      }
      return it->second;
    }

    const std::vector<cplx>& scaled_spectrum(double base_alpha, int census) {
      ScaledFamily& family = scaled[key_bits(base_alpha)];
      if (family.squares.empty()) {
        std::vector<cplx> unit_power = acquire();
        for (int k = 0; k <= half; ++k) unit_power[k] = std::exp(base_alpha * immig_arg[k]);
        family.squares.push_back(std::move(unit_power));
      }
      auto [it, inserted] = family.by_census.try_emplace(census);
      if (inserted) {
        while ((1 << family.squares.size()) <= census) {
          std::vector<cplx> next = acquire();
          const auto& prev = family.squares.back();
          for (int k = 0; k <= half; ++k) next[k] = prev[k] * prev[k];
          family.squares.push_back(std::move(next));
        }
        std::vector<cplx> acc = acquire();
        bool loaded = false;
        for (int b = 0; (1 << b) <= census; ++b) {
          if (!(census & (1 << b))) continue;
          const auto& square = family.squares[b];
          if (!loaded) {
            std::copy(square.begin(), square.end(), acc.begin());
            loaded = true;
          } else {
            for (int k = 0; k <= half; ++k) acc[k] *= square[k];
          }
        }
        it->second = std::move(acc);
      }
      return it->second;
    }

    const std::vector<cplx>& state_powers(int i) {
      if (i <= kIncrementalPowerCap) {
        while (state_power_valid <= i) {
          if (static_cast<int>(state_power.size()) <= state_power_valid)
            state_power.push_back(acquire());
          auto& next = state_power[state_power_valid];
          next.resize(half + 1);
          const auto& prev = state_power[state_power_valid - 1];
          for (int k = 0; k <= half; ++k) next[k] = prev[k] * survive[k];
          ++state_power_valid;
        }
        return state_power[i];
      }
      auto [it, inserted] = state_power_big.try_emplace(i);
      if (inserted) {
        it->second = acquire();
        for (int k = 0; k <= half; ++k) it->second[k] = pow_int(survive[k], i);
      }
      return it->second;
    }

    // (1/n) * sum_k pgf(s_k) e^{-2*pi*i*k*to/n} with pgf(s_k) given as the
    // pointwise product immig[k]*state[k], using conjugate symmetry of the
    // spectrum of a real coefficient sequence.
    double coefficient(const std::vector<cplx>& immig, const std::vector<cplx>& state,
                       int to) const {
      const auto& unit = circle->unit;
      double acc = (immig[0] * state[0]).real();
      const double nyquist = (immig[half] * state[half]).real();
      acc += (to & 1) ? -nyquist : nyquist;
      double doubled = 0;
      int m = to;  // k*to mod n, advanced incrementally
      for (int k = 1; k < half; ++k) {
        const cplx c = immig[k] * state[k];
        const cplx w = unit[m];
        // Re(c * conj(w))
        doubled += c.real() * w.real() + c.imag() * w.imag();
        m += to;
        if (m >= n) m -= n;
      }
      acc += 2.0 * doubled;
      return acc / static_cast<double>(n);
    }
  };

  Level levels[2];
  bool escalated_ready = false;
  std::unordered_map<TripleKey, double, TripleHash> prob_memo;
  std::unordered_map<PairKey, int, PairHash> level_for;  // aliasing guard verdicts

  Level& base() { return levels[0]; }

  Level& escalated() {
    if (!escalated_ready) {
      levels[1].init(levels[0].n * 2, mu, elapsed);
      escalated_ready = true;
    }
    return levels[1];
  }

  // Picks the resolution for (alpha, from): the base grid when the top of
  // the grid carries no mass, otherwise the doubled grid, otherwise failure.
  // The analytic mean-plus-tail bound rejects distributions that reach past
  // the grid even when they wrap into the interior and leave the top index
  // looking clean; the inverted top-index coefficient settles the cases
  // where the bound lands near the boundary.
  template <typename SpectrumOf>
  Level& resolve(double alpha_eff, int from, SpectrumOf&& spectrum_of) {
    const PairKey key{key_bits(alpha_eff), from};
    if (auto it = level_for.find(key); it != level_for.end())
      return levels[it->second];
    const double decay = std::exp(-mu * elapsed);
    const double mean = from * decay + alpha_eff * (1.0 - decay) / mu;
    const double reach = mean + 10.0 * std::sqrt(mean + 1.0) + 20.0;
    for (int which = 0; which < 2; ++which) {
      Level& lv = which == 0 ? base() : escalated();
      if (!(reach < static_cast<double>(lv.n))) continue;
      if (reach >= 0.75 * lv.n) {
        if (lv.coefficient(spectrum_of(lv), lv.state_powers(from), lv.n - 1) > kAliasTol)
          continue;
      }
      level_for.emplace(key, which);
      return lv;
    }
    raise(Errc::aliasing_risk,
          "probability mass exceeds the doubled grid; raise n_grid");
  }

  template <typename SpectrumOf>
  double prob_via(int from, int to, double alpha_eff, SpectrumOf&& spectrum_of) {
    if (from < 0 || to < 0) raise(Errc::invalid_input, "states must be nonnegative");
    if (!(alpha_eff > 0) || !std::isfinite(alpha_eff))
      raise(Errc::invalid_input, "alpha must be positive and finite");
    if (from >= base().n || to >= base().n)
      raise(Errc::state_overflow, "state does not fit the transition grid");

    const TripleKey key{key_bits(alpha_eff), from, to};
    if (auto it = prob_memo.find(key); it != prob_memo.end()) return it->second;

    Level& lv = resolve(alpha_eff, from, spectrum_of);
    const double value =
        std::max(lv.coefficient(spectrum_of(lv), lv.state_powers(from), to), cfg.clamp_floor);
    prob_memo.emplace(key, value);
    return value;
  }
};

TransitionEngine::TransitionEngine(double mu, double elapsed, KernelConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  if (!(mu >= kMuFloor) || !std::isfinite(mu))
    raise(Errc::degenerate_rate, "mu below numerical floor");
  if (!(elapsed > 0) || !std::isfinite(elapsed))
    raise(Errc::invalid_input, "elapsed time must be positive");
  impl_->mu = mu;
  impl_->elapsed = elapsed;
  impl_->cfg = cfg;
  impl_->base().init(cfg.n_grid, mu, elapsed);
}

TransitionEngine::~TransitionEngine() = default;
TransitionEngine::TransitionEngine(TransitionEngine&&) noexcept = default;
TransitionEngine& TransitionEngine::operator=(TransitionEngine&&) noexcept = default;

void TransitionEngine::rebind(double mu) {
  if (!(mu >= kMuFloor) || !std::isfinite(mu))
    raise(Errc::degenerate_rate, "mu below numerical floor");
  impl_->mu = mu;
  impl_->levels[0].rebind(mu, impl_->elapsed);
  if (impl_->escalated_ready) impl_->levels[1].rebind(mu, impl_->elapsed);
  impl_->prob_memo.clear();
  impl_->level_for.clear();
}

double TransitionEngine::mu() const { return impl_->mu; }
double TransitionEngine::elapsed() const { return impl_->elapsed; }
int TransitionEngine::grid_size() const { return impl_->base().n; }

double TransitionEngine::prob(int from, int to, double alpha) {
  return impl_->prob_via(from, to, alpha, [&](Impl::Level& lv) -> const std::vector<cplx>& {
    return lv.immigration_spectrum(alpha);
  });
}

double TransitionEngine::prob_scaled(int from, int to, double base_alpha, int census) {
  if (census < 1) raise(Errc::invalid_input, "census multiplier must be at least 1");
  if (!(base_alpha > 0) || !std::isfinite(base_alpha))
    raise(Errc::invalid_input, "alpha must be positive and finite");
  const double alpha_eff = base_alpha * census;
  return impl_->prob_via(from, to, alpha_eff,
                         [&](Impl::Level& lv) -> const std::vector<cplx>& {
                           return lv.scaled_spectrum(base_alpha, census);
                         });
}

TransitionRow TransitionEngine::row(int from, double alpha) {
  if (from < 0) raise(Errc::invalid_input, "states must be nonnegative");
  if (!(alpha > 0) || !std::isfinite(alpha))
    raise(Errc::invalid_input, "alpha must be positive and finite");
  if (from >= impl_->base().n)
    raise(Errc::state_overflow, "state does not fit the transition grid");

  auto spectrum_of = [&](Impl::Level& lv) -> const std::vector<cplx>& {
    return lv.immigration_spectrum(alpha);
  };
  Impl::Level& lv = impl_->resolve(alpha, from, spectrum_of);
  const auto& immig = lv.immigration_spectrum(alpha);
  const auto& state = lv.state_powers(from);

  std::vector<cplx> spectrum(lv.n);
  for (int k = 0; k <= lv.half; ++k) spectrum[k] = immig[k] * state[k];
  for (int k = 1; k < lv.half; ++k) spectrum[lv.n - k] = std::conj(spectrum[k]);
  fft(spectrum, -1, *lv.circle);

  TransitionRow out;
  out.from_state = from;
  out.elapsed = impl_->elapsed;
  out.alpha = alpha;
  out.mu = impl_->mu;
  out.probs.resize(lv.n);
  out.min_raw = 0;
  double sum = 0;
  const double scale = 1.0 / static_cast<double>(lv.n);
  for (int j = 0; j < lv.n; ++j) {
    const double raw = spectrum[j].real() * scale;
    out.min_raw = std::min(out.min_raw, raw);
    out.probs[j] = std::max(raw, impl_->cfg.clamp_floor);
    sum += out.probs[j];
  }
  if (std::abs(sum - 1.0) > 1e-8)
    raise(Errc::invalid_input, "transition row failed to normalize");
  return out;
}

TransitionRow transition_row(int i, double t, double alpha, double mu, const KernelConfig& cfg) {
  TransitionEngine engine(mu, t, cfg);
  return engine.row(i, alpha);
}

}  // namespace idp::kernel
