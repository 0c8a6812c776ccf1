#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "idp/errors.hpp"
#include "idp/kernel.hpp"
#include "idp/rng.hpp"
#include "oracles.hpp"

using idp::Errc;
using idp::Error;
using idp::kernel::KernelConfig;
using idp::kernel::pgf_eval;
using idp::kernel::transition_row;
using idp::kernel::TransitionEngine;
using idp::kernel::TransitionRow;

namespace {

double poisson_mean(double alpha, double mu, double t) {
  return alpha * (1.0 - std::exp(-mu * t)) / mu;
}

}  // namespace

TEST_CASE("pgf normalizes exactly at s=1") {
  for (int i : {0, 1, 3, 40}) {
    const std::complex<double> v = pgf_eval(i, {1.0, 0.0}, 2.5, 0.7, 0.3);
    CHECK(v.real() == 1.0);
    CHECK(v.imag() == 0.0);
  }
}

TEST_CASE("pgf approaches s^i as t -> 0") {
  const std::complex<double> s{0.3, 0.4};
  const std::complex<double> v = pgf_eval(3, s, 1e-12, 1.0, 0.5);
  const std::complex<double> expected = s * s * s;
  CHECK(std::abs(v - expected) < 1e-10);
}

TEST_CASE("pgf from an empty ICU reduces to the Poisson generating function") {
  // With no initial patients only immigrants remain, and their count is
  // Poisson with mean alpha*(1-e^{-mu t})/mu.
  const double lambda = poisson_mean(1.0, 0.5, 1.0);
  const double expected = std::exp(-0.5 * lambda);  // exp[-lambda(1-s)] at s=0.5
  const std::complex<double> v = pgf_eval(0, {0.5, 0.0}, 1.0, 1.0, 0.5);
  CHECK(v.real() == doctest::Approx(expected).epsilon(1e-13));
  CHECK(std::abs(v.imag()) < 1e-15);
  CHECK(expected == doctest::Approx(0.6747120037358997).epsilon(1e-12));
}

TEST_CASE("pgf stays bounded on the unit circle") {
  idp::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform01();
    const std::complex<double> s = std::polar(1.0, theta);
    const int i = static_cast<int>(rng.below(50));
    const double alpha = 0.05 + 10.0 * rng.uniform01();
    const double mu = 0.05 + rng.uniform01();
    const double t = 0.1 + 7.0 * rng.uniform01();
    CHECK(std::abs(pgf_eval(i, s, t, alpha, mu)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("row from state 0 matches the analytic Poisson pmf") {
  for (double alpha : {0.1, 10.0}) {
    for (double mu : {0.05, 1.0}) {
      const TransitionRow row = transition_row(0, 1.0, alpha, mu);
      const auto pmf =
          oracles::poisson_pmf(poisson_mean(alpha, mu, 1.0), static_cast<int>(row.probs.size()));
      for (size_t j = 0; j < row.probs.size(); ++j)
        CHECK(std::abs(row.probs[j] - pmf[j]) < 1e-10);
    }
  }
}

TEST_CASE("rows normalize and keep coefficients nonnegative") {
  idp::Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int i = static_cast<int>(rng.below(80));
    const double alpha = 0.05 + 8.0 * rng.uniform01();
    const double mu = 0.05 + 0.8 * rng.uniform01();
    const double t = 0.25 + 6.0 * rng.uniform01();
    const TransitionRow row = transition_row(i, t, alpha, mu);
    double sum = 0;
    for (double p : row.probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-8);
    CHECK(row.min_raw >= -1e-10);
  }
}

TEST_CASE("row matches the truncated-generator matrix exponential") {
  const TransitionRow row = transition_row(5, 0.7, 2.0, 0.3);
  const auto oracle = oracles::expm_transition_row(5, 0.7, 2.0, 0.3, 400);
  for (int j = 0; j < 400; ++j)
    CHECK(std::abs(row.probs[j] - oracle[j]) < 1e-7);
}

TEST_CASE("rows satisfy Chapman-Kolmogorov under constant rates") {
  const double alpha = 1.5, mu = 0.25, t = 0.6, s = 0.9;
  const TransitionRow first = transition_row(7, t, alpha, mu);
  const TransitionRow direct = transition_row(7, t + s, alpha, mu);

  TransitionEngine second_leg(mu, s);
  constexpr int kSupport = 400;  // mass beyond is far below the tolerance
  std::vector<std::vector<double>> second(kSupport);
  for (int k = 0; k < kSupport; ++k) second[k] = second_leg.row(k, alpha).probs;

  for (int j = 0; j <= 200; ++j) {
    double composed = 0;
    for (int k = 0; k < kSupport; ++k) composed += first.probs[k] * second[k][j];
    CHECK(std::abs(composed - direct.probs[j]) < 1e-6);
  }
}

TEST_CASE("single-coefficient queries agree with full rows") {
  TransitionEngine engine(0.22, 1.0);
  for (double alpha : {0.4, 3.7, 9.2}) {
    const TransitionRow row = engine.row(17, alpha);
    for (int j : {0, 3, 11, 17, 18, 40, 120})
      CHECK(engine.prob(17, j, alpha) == doctest::Approx(row.probs[j]).epsilon(1e-12));
  }
}

TEST_CASE("the census-scaled path matches plain probabilities") {
  TransitionEngine scaled(0.2, 1.0);
  TransitionEngine plain(0.2, 1.0);
  for (int census : {1, 2, 43, 107, 640}) {
    for (double base : {0.004, 0.1}) {
      for (int from : {0, 5, 21, 180}) {
        for (int to : {0, 4, 21, 33, 170}) {
          const double expected = plain.prob(from, to, base * census);
          CHECK(scaled.prob_scaled(from, to, base, census) ==
                doctest::Approx(expected).epsilon(1e-11));
        }
      }
    }
  }
  CHECK_THROWS_AS(scaled.prob_scaled(1, 1, 0.1, 0), Error);
}

TEST_CASE("mass past the grid top escalates once, then errors") {
  // mean occupancy ~3380 exceeds 2048 but fits a 4096 grid
  const TransitionRow row = transition_row(0, 7.0, 500.0, 0.01);
  CHECK(row.probs.size() == 4096);
  double sum = 0;
  for (double p : row.probs) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-8);

  // mean ~13500 does not fit even after doubling
  CHECK_THROWS_AS(transition_row(0, 7.0, 2000.0, 0.01), Error);
  try {
    transition_row(0, 7.0, 2000.0, 0.01);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::aliasing_risk);
  }
}

TEST_CASE("clearance rates below the floor are rejected") {
  CHECK_THROWS_AS(pgf_eval(0, {0.5, 0.0}, 1.0, 1.0, 1e-9), Error);
  CHECK_THROWS_AS(transition_row(0, 1.0, 1.0, 1e-9), Error);
  try {
    transition_row(0, 1.0, 1.0, 1e-9);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_rate);
  }
}

TEST_CASE("states beyond the grid are a state overflow") {
  TransitionEngine engine(0.2, 1.0);
  CHECK_THROWS_AS(engine.prob(2048, 3, 1.0), Error);
  try {
    engine.prob(3, 2048, 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::state_overflow);
  }
}

TEST_CASE("kernel config is validated") {
  CHECK_THROWS_AS(transition_row(0, 1.0, 1.0, 0.5, KernelConfig{1000, 0.0}), Error);
  CHECK_THROWS_AS(transition_row(0, 1.0, 1.0, 0.5, KernelConfig{2048, -1.0}), Error);
}

TEST_CASE("clamp floor lifts every coefficient") {
  const KernelConfig cfg{2048, 1e-12};
  const TransitionRow row = transition_row(4, 1.0, 0.8, 0.3, cfg);
  for (double p : row.probs) CHECK(p >= 1e-12);
}
