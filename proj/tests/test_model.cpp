#include <doctest.h>

#include <cmath>

#include "idp/errors.hpp"
#include "idp/model.hpp"
#include "idp/rng.hpp"

using idp::Errc;
using idp::Error;
using namespace idp::model;

namespace {

ParamVector params_for(const ModelSpec& spec, double alpha, double mu, double bh = 0,
                       double bhp = 0, double bp = 0) {
  ParamVector p;
  p.alpha = alpha;
  p.mu = mu;
  if (spec.has_beta_h()) p.beta_h = bh;
  if (spec.has_beta_hp()) p.beta_hp = bhp;
  if (spec.has_beta_p()) p.beta_p = bp;
  return p;
}

}  // namespace

TEST_CASE("census-proportional model is alpha times the census") {
  const ModelSpec m5{ModelId::M5};
  const ParamVector p = params_for(m5, 0.1, 0.2);
  CHECK(immigration_rate_at(m5, p, 43, 0.0) == doctest::Approx(4.3).epsilon(1e-12));
  CHECK(immigration_rate_at(m5, p, 43, 0.7) == doctest::Approx(4.3).epsilon(1e-12));
}

TEST_CASE("a zeroed positivity effect reproduces the smaller model") {
  const ModelSpec m3{ModelId::M3}, m4{ModelId::M4};
  const ParamVector p3 = params_for(m3, 0.8, 0.2, 0.6, 0, 0.0);
  const ParamVector p4 = params_for(m4, 0.8, 0.2, 0.6);
  for (int h : {1, 17, 240})
    for (double p : {0.0, 0.3, 1.0})
      CHECK(immigration_rate_at(m3, p3, h, p) == immigration_rate_at(m4, p4, h, p));
}

TEST_CASE("full covariate model evaluates its log-linear form") {
  const ModelSpec m3{ModelId::M3};
  const ParamVector p = params_for(m3, 1.08, 0.19, 0.49, 0, 6.97);
  const double expected = std::exp(std::log(1.08) + 0.49 * std::log(100.0) + 6.97 * 0.05);
  const double got = immigration_rate_at(m3, p, 100, 0.05);
  CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  CHECK(got == doctest::Approx(14.614211303910727).epsilon(1e-12));
}

TEST_CASE("covariates outside their domain are rejected") {
  const ModelSpec m3{ModelId::M3};
  const ParamVector p = params_for(m3, 1.0, 0.2, 0.5, 0, 7.0);
  CHECK_THROWS_AS(immigration_rate_at(m3, p, -1, 0.1), Error);
  CHECK_THROWS_AS(immigration_rate_at(m3, p, 10, -0.01), Error);
  CHECK_THROWS_AS(immigration_rate_at(m3, p, 10, 1.01), Error);
  try {
    immigration_rate_at(m3, p, 10, 1.01);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_covariate);
  }
}

TEST_CASE("an empty hospital enters the log terms as one occupied bed") {
  const ModelSpec m4{ModelId::M4};
  const ParamVector p = params_for(m4, 0.7, 0.2, 1.3);
  CHECK(immigration_rate_at(m4, p, 0, 0.0) == immigration_rate_at(m4, p, 1, 0.0));
  CHECK(immigration_rate_at(m4, p, 0, 0.0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("mean ICU stay is the reciprocal clearance rate") {
  ParamVector p;
  p.alpha = 1.0;
  p.mu = 0.2;
  CHECK(mean_icu_stay(p) == 5.0);
  p.mu = 0.08;
  CHECK(mean_icu_stay(p) == 12.5);
  p.mu = 1.0;
  CHECK(mean_icu_stay(p) == 1.0);
  // reciprocal identity at the scales above
  for (double mu : {0.2, 0.08, 1.0, 0.5, 2.0}) {
    p.mu = mu;
    CHECK(mean_icu_stay(p) * p.mu == 1.0);
  }
  p.mu = 0.0;
  CHECK_THROWS_AS(mean_icu_stay(p), Error);
  p.mu = -0.1;
  CHECK_THROWS_AS(mean_icu_stay(p), Error);
}

TEST_CASE("model dimensions follow the candidate table") {
  CHECK(model_dimension({ModelId::M1}) == 5);
  CHECK(model_dimension({ModelId::M2}) == 4);
  CHECK(model_dimension({ModelId::M3}) == 4);
  CHECK(model_dimension({ModelId::M4}) == 3);
  CHECK(model_dimension({ModelId::M5}) == 2);
}

TEST_CASE("rates are positive and monotone in the census when beta_h > 0") {
  idp::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    for (const ModelSpec& spec : ModelSpec::all()) {
      const ParamVector p =
          params_for(spec, 0.01 + 3.0 * rng.uniform01(), 0.01 + rng.uniform01(),
                     0.01 + 2.0 * rng.uniform01(),  // beta_h positive for monotonicity
                     -2.0 + 4.0 * rng.uniform01(), 30.0 * rng.uniform01());
      const int h = static_cast<int>(rng.below(300));
      const double pos = rng.uniform01();
      const double rate = immigration_rate_at(spec, p, h, pos);
      CHECK(rate > 0.0);
      CHECK(std::isfinite(rate));
      if (!spec.has_beta_hp()) {  // interaction can flip the census slope
        const int bigger = h + 1 + static_cast<int>(rng.below(50));
        CHECK(immigration_rate_at(spec, p, bigger, pos) >= rate * (1.0 - 1e-12));
      }
    }
  }
}

TEST_CASE("larger models with disabled extras reproduce nested models pointwise") {
  idp::Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 0.05 + 2.0 * rng.uniform01();
    const double mu = 0.05 + rng.uniform01();
    const double bh = -1.0 + 2.0 * rng.uniform01();
    const double bhp = -1.0 + 2.0 * rng.uniform01();
    const double bp = 10.0 * rng.uniform01();
    const int h = 1 + static_cast<int>(rng.below(400));
    const double pos = rng.uniform01();

    const ModelSpec m1{ModelId::M1}, m2{ModelId::M2}, m3{ModelId::M3}, m4{ModelId::M4},
        m5{ModelId::M5};
    // M1 -> M3 (beta_hp = 0) and M1 -> M2 (beta_p = 0)
    CHECK(immigration_rate_at(m1, params_for(m1, alpha, mu, bh, 0, bp), h, pos) ==
          immigration_rate_at(m3, params_for(m3, alpha, mu, bh, 0, bp), h, pos));
    CHECK(immigration_rate_at(m1, params_for(m1, alpha, mu, bh, bhp, 0), h, pos) ==
          immigration_rate_at(m2, params_for(m2, alpha, mu, bh, bhp, 0), h, pos));
    // M3/M2 -> M4 (positivity terms off)
    CHECK(immigration_rate_at(m3, params_for(m3, alpha, mu, bh, 0, 0), h, pos) ==
          immigration_rate_at(m4, params_for(m4, alpha, mu, bh), h, pos));
    CHECK(immigration_rate_at(m2, params_for(m2, alpha, mu, bh, 0), h, pos) ==
          immigration_rate_at(m4, params_for(m4, alpha, mu, bh), h, pos));
    // M4 with beta_h = 1 -> M5
    CHECK(immigration_rate_at(m4, params_for(m4, alpha, mu, 1.0), h, pos) ==
          immigration_rate_at(m5, params_for(m5, alpha, mu), h, pos));
  }
}

TEST_CASE("parameter vectors must match their model") {
  const ModelSpec m4{ModelId::M4};
  ParamVector p = params_for(m4, 1.0, 0.2, 0.5);
  p.beta_p = 3.0;  // not an M4 coefficient
  CHECK_THROWS_AS(immigration_rate_at(m4, p, 10, 0.1), Error);

  ParamVector missing;
  missing.alpha = 1.0;
  missing.mu = 0.2;
  CHECK_THROWS_AS(immigration_rate_at(m4, missing, 10, 0.1), Error);

  ParamVector bad = params_for(m4, -1.0, 0.2, 0.5);
  CHECK_THROWS_AS(validate_params(m4, bad), Error);
}

TEST_CASE("packing round-trips through the flat layout") {
  idp::Rng rng(5);
  for (const ModelSpec& spec : ModelSpec::all()) {
    const ParamVector p = params_for(spec, 0.5 + rng.uniform01(), 0.1 + rng.uniform01(),
                                     rng.uniform01(), rng.uniform01(), rng.uniform01());
    const auto flat = pack_params(spec, p);
    CHECK(static_cast<int>(flat.size()) == spec.parameter_count());
    CHECK(parameter_names(spec).size() == flat.size());
    const ParamVector back = unpack_params(spec, flat);
    CHECK(back.alpha == p.alpha);
    CHECK(back.mu == p.mu);
    CHECK(back.beta_h == p.beta_h);
    CHECK(back.beta_hp == p.beta_hp);
    CHECK(back.beta_p == p.beta_p);
  }
}

TEST_CASE("model names parse and print") {
  CHECK(ModelSpec::from_name("M3").id == ModelId::M3);
  CHECK(ModelSpec{ModelId::M1}.name() == "M1");
  CHECK_THROWS_AS(ModelSpec::from_name("M9"), Error);
}
