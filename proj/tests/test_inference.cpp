#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "idp/errors.hpp"
#include "idp/inference.hpp"
#include "idp/kernel.hpp"
#include "idp/model.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using idp::Errc;
using idp::Error;
using namespace idp::model;
using namespace idp::inference;

namespace {

ParamVector m5_params(double alpha, double mu) {
  ParamVector p;
  p.alpha = alpha;
  p.mu = mu;
  return p;
}

FitOptions quick_options(int grid = 512, int restarts = 3, std::uint64_t seed = 11) {
  FitOptions opts;
  opts.kernel.n_grid = grid;
  opts.restarts = restarts;
  opts.seed = seed;
  return opts;
}

}  // namespace

TEST_CASE("a single transition contributes exactly its log probability") {
  const auto data = synthetic::assemble({3, 3}, {43, 43}, {0.0, 0.0});
  const ParamVector p = m5_params(0.1, 0.2);
  const double ll = log_likelihood(data.series, data.cov, {ModelId::M5}, p);
  const auto row = idp::kernel::transition_row(3, 1.0, 0.1 * 43, 0.2);
  CHECK(ll == doctest::Approx(std::log(row.probs[3])).epsilon(1e-10));
}

TEST_CASE("likelihood agrees with the truncated-generator oracle") {
  SUBCASE("constant rates") {
    const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 25, 10, 17);
    const ParamVector p = m5_params(0.12, 0.23);
    const double ll = log_likelihood(data.series, data.cov, {ModelId::M5}, p);
    double expected = 0;
    for (int k = 0; k < 10; ++k) {
      const auto row = oracles::expm_transition_row(data.series.icu_census[k], 1.0, 0.12 * 43,
                                                    0.23, 400);
      expected += std::log(row[data.series.icu_census[k + 1]]);
    }
    CHECK(ll == doctest::Approx(expected).epsilon(1e-5));
  }
  SUBCASE("covariate-driven rates") {
    const ModelSpec m3{ModelId::M3};
    ParamVector p;
    p.alpha = 0.9;
    p.mu = 0.25;
    p.beta_h = 0.5;
    p.beta_p = 5.0;
    const auto census = synthetic::wave_census(11, 60, 40, 40, 0.3);
    const auto positivity = synthetic::wave_positivity(11, 0.03, 0.12, 40, 1.1);
    const auto data = synthetic::from_model(m3, p, census, positivity, 12, 23);
    const double ll = log_likelihood(data.series, data.cov, m3, p);
    double expected = 0;
    for (int k = 0; k < 10; ++k) {
      const double alpha_eff = immigration_rate_at(m3, p, census[k], positivity[k]);
      const auto row =
          oracles::expm_transition_row(data.series.icu_census[k], 1.0, alpha_eff, 0.25, 400);
      expected += std::log(row[data.series.icu_census[k + 1]]);
    }
    CHECK(ll == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("true parameters dominate a misscaled alternative on average") {
  const ParamVector truth = m5_params(0.1, 0.2);
  const ParamVector wrong = m5_params(0.2, 0.4);
  double at_truth = 0, at_wrong = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 21, 100, 40, rep);
    at_truth += log_likelihood(data.series, data.cov, {ModelId::M5}, truth);
    at_wrong += log_likelihood(data.series, data.cov, {ModelId::M5}, wrong);
  }
  CHECK(at_truth / 50.0 > at_wrong / 50.0);
}

TEST_CASE("clamped-to-zero transitions yield the penalty value, not -inf") {
  const auto row = idp::kernel::transition_row(0, 1.0, 1.0, 0.5);
  // far tail where the true probability underflows and clamping bites
  int dead_state = -1;
  for (int j = 1500; j < 2048; ++j) {
    if (row.probs[j] == 0.0) {
      dead_state = j;
      break;
    }
  }
  REQUIRE(dead_state > 0);
  const auto data = synthetic::assemble({0, dead_state}, {1, 1}, {0.0, 0.0});
  const double ll = log_likelihood(data.series, data.cov, {ModelId::M5}, m5_params(1.0, 0.5));
  CHECK(ll == kLogLikPenalty);
}

TEST_CASE("counts past the grid are a state overflow") {
  const auto data = synthetic::assemble({3, 300}, {10, 10}, {0.0, 0.0});
  idp::kernel::KernelConfig cfg;
  cfg.n_grid = 256;
  CHECK_THROWS_AS(log_likelihood(data.series, data.cov, {ModelId::M5}, m5_params(1.0, 0.5), cfg),
                  Error);
  try {
    log_likelihood(data.series, data.cov, {ModelId::M5}, m5_params(1.0, 0.5), cfg);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::state_overflow);
  }
}

TEST_CASE("maximum likelihood recovers the generating parameters") {
  const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 21, 200, 3);
  FitOptions opts = quick_options(2048, 10, 5);
  const FitResult fit = fit_mle(data.series, data.cov, {ModelId::M5}, opts);
  CHECK(fit.converged);
  CHECK(fit.restarts_agreeing >= 8);  // restart stability
  CHECK(std::abs(fit.mle.alpha - 0.1) < 0.05);
  CHECK(std::abs(fit.mle.mu - 0.2) < 0.08);
  CHECK(fit.aic == -2.0 * fit.loglik + 2.0 * 2);
  CHECK(fit.loglik > -1e9);  // the penalty is never the returned optimum

  SUBCASE("same seed, same fit") {
    const FitResult again = fit_mle(data.series, data.cov, {ModelId::M5}, opts);
    CHECK(again.loglik == fit.loglik);
    CHECK(again.mle.alpha == fit.mle.alpha);
    CHECK(again.mle.mu == fit.mle.mu);
  }
}

TEST_CASE("intervals are centered at the estimate with 1.96 sigma half-width") {
  const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 21, 150, 9);
  const FitOptions opts = quick_options(2048, 4, 2);
  FitResult fit = fit_mle(data.series, data.cov, {ModelId::M5}, opts);
  fit = confidence_intervals(fit, data.series, data.cov, opts.kernel);

  const auto theta = pack_params(fit.spec, fit.mle);
  for (size_t i = 0; i < theta.size(); ++i) {
    const double half = 1.96 * std::sqrt(fit.covariance[i][i]);
    CHECK(fit.intervals[i].first == theta[i] - half);
    CHECK(fit.intervals[i].second == theta[i] + half);
    CHECK(fit.covariance[i][i] > 0.0);
  }
  // covariance symmetric within 1e-8 relative
  double scale = 0, asym = 0;
  for (size_t i = 0; i < theta.size(); ++i)
    for (size_t j = 0; j < theta.size(); ++j) {
      scale = std::max(scale, std::abs(fit.covariance[i][j]));
      asym = std::max(asym, std::abs(fit.covariance[i][j] - fit.covariance[j][i]));
    }
  CHECK(asym <= 1e-8 * scale);
}

TEST_CASE("collinear covariates make the information matrix singular") {
  // constant census and positivity leave only one identifiable combination
  // of the four immigration coefficients
  const auto data =
      synthetic::m5_constant_census(0.1, 0.2, 43, 21, 120, 13);  // census fixed at 43
  ParamVector p;
  p.alpha = 4.3 / std::pow(43.0, 0.5);
  p.mu = 0.2;
  p.beta_h = 0.5;
  p.beta_hp = 0.0;
  p.beta_p = 1.0;
  FitResult pretend;
  pretend.spec = ModelSpec{ModelId::M1};
  pretend.mle = p;
  pretend.converged = true;
  pretend.loglik = 0;
  pretend.aic = 10;
  CHECK_THROWS_AS(confidence_intervals(pretend, data.series, data.cov, {}), Error);
  try {
    confidence_intervals(pretend, data.series, data.cov, {});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::singular_information);
  }
}

TEST_CASE("selection ranks by AIC and keeps likelihoods monotone along nesting") {
  const ModelSpec m4{ModelId::M4};
  ParamVector truth;
  truth.alpha = 1.0;
  truth.mu = 0.2;
  truth.beta_h = 0.49;
  const auto census = synthetic::wave_census(121, 150, 250, 90, 0.4);
  const auto positivity = synthetic::wave_positivity(121, 0.03, 0.13, 75, 1.9);
  const int i0 = 35;
  const auto data = synthetic::from_model(m4, truth, census, positivity, i0, 71);

  const auto outcome =
      select_model(data.series, data.cov, ModelSpec::all(), quick_options(512, 2, 19));
  REQUIRE(outcome.excluded.empty());
  REQUIRE(outcome.ranked.size() == 5);
  for (size_t i = 1; i < outcome.ranked.size(); ++i)
    CHECK(outcome.ranked[i - 1].aic <= outcome.ranked[i].aic);

  double ll[6];
  for (const FitResult& fit : outcome.ranked) ll[fit.spec.parameter_count() == 2 ? 5 :
      fit.spec.id == ModelId::M4 ? 4 : fit.spec.id == ModelId::M3 ? 3 :
      fit.spec.id == ModelId::M2 ? 2 : 1] = fit.loglik;
  const double tol = 1e-4;
  CHECK(ll[5] <= ll[4] + tol);  // M5 -> M4
  CHECK(ll[4] <= ll[3] + tol);  // M4 -> M3
  CHECK(ll[4] <= ll[2] + tol);  // M4 -> M2
  CHECK(ll[3] <= ll[1] + tol);  // M3 -> M1
  CHECK(ll[2] <= ll[1] + tol);  // M2 -> M1
}

TEST_CASE("failing candidates are excluded with a reason, not fatal") {
  // six observations: enough for M5/M4/M3/M2, one short for M1
  const auto data = synthetic::assemble({5, 7, 6, 8, 9, 7}, {40, 42, 44, 43, 41, 40},
                                        {0.1, 0.1, 0.2, 0.2, 0.1, 0.1});
  const auto outcome =
      select_model(data.series, data.cov, ModelSpec::all(), quick_options(512, 2, 3));
  REQUIRE(outcome.excluded.size() == 1);
  CHECK(outcome.excluded[0].first.id == ModelId::M1);
  CHECK(outcome.excluded[0].second.find("insufficient-data") != std::string::npos);
  CHECK(outcome.ranked.size() == 4);
}

TEST_CASE("degenerate inputs are rejected up front") {
  SUBCASE("all-zero series") {
    const auto data = synthetic::assemble(std::vector<int>(30, 0), std::vector<int>(30, 40),
                                          std::vector<double>(30, 0.0));
    CHECK_THROWS_AS(fit_mle(data.series, data.cov, {ModelId::M5}, quick_options()), Error);
    try {
      fit_mle(data.series, data.cov, {ModelId::M5}, quick_options());
    } catch (const Error& e) {
      CHECK(e.code() == Errc::degenerate_data);
    }
  }
  SUBCASE("too few observations") {
    const auto data = synthetic::assemble({3, 4, 3}, {40, 40, 40}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(fit_mle(data.series, data.cov, {ModelId::M5}, quick_options()), Error);
  }
  SUBCASE("fewer than two candidates") {
    const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 21, 30, 3);
    CHECK_THROWS_AS(select_model(data.series, data.cov, {ModelSpec{ModelId::M5}},
                                 quick_options()),
                    Error);
  }
  SUBCASE("exhausted iteration budget on every restart") {
    const auto data = synthetic::m5_constant_census(0.1, 0.2, 43, 21, 40, 3);
    FitOptions opts = quick_options();
    opts.max_iterations = 1;
    try {
      fit_mle(data.series, data.cov, {ModelId::M5}, opts);
      FAIL("expected non-convergence");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_convergence);
    }
  }
}
