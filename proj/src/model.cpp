#include "idp/model.hpp"

#include <cmath>

#include "idp/errors.hpp"

namespace idp::model {

int ModelSpec::parameter_count() const {
  switch (id) {
    case ModelId::M1: return 5;
    case ModelId::M2: return 4;
    case ModelId::M3: return 4;
    case ModelId::M4: return 3;
    case ModelId::M5: return 2;
  }
  raise(Errc::invalid_input, "bad model id");
}

bool ModelSpec::has_beta_h() const { return id != ModelId::M5; }

bool ModelSpec::has_beta_hp() const { return id == ModelId::M1 || id == ModelId::M2; }

bool ModelSpec::has_beta_p() const { return id == ModelId::M1 || id == ModelId::M3; }

std::string ModelSpec::name() const {
  switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    case ModelId::M5: return "M5";
  }
  return "?";
}

ModelSpec ModelSpec::from_name(const std::string& name) {
  for (const ModelSpec& spec : all())
    if (spec.name() == name) return spec;
  raise(Errc::bad_config, "unknown model '" + name + "', expected M1..M5");
}

std::vector<ModelSpec> ModelSpec::all() {
  return {{ModelId::M1}, {ModelId::M2}, {ModelId::M3}, {ModelId::M4}, {ModelId::M5}};
}

void validate_params(const ModelSpec& spec, const ParamVector& params) {
  if (!(params.alpha > 0) || !std::isfinite(params.alpha))
    raise(Errc::invalid_input, "alpha must be positive and finite");
  if (!(params.mu > 0) || !std::isfinite(params.mu))
    raise(Errc::invalid_input, "mu must be positive and finite");
  if (params.beta_h.has_value() != spec.has_beta_h())
    raise(Errc::invalid_input, "beta_h does not match model " + spec.name());
  if (params.beta_hp.has_value() != spec.has_beta_hp())
    raise(Errc::invalid_input, "beta_hp does not match model " + spec.name());
  if (params.beta_p.has_value() != spec.has_beta_p())
    raise(Errc::invalid_input, "beta_p does not match model " + spec.name());
}

void validate_covariates(const CovariatePath& cov) {
  const size_t n = cov.dates.size();
  if (cov.hospital_census.size() != n || cov.positivity.size() != n)
    raise(Errc::invalid_input, "covariate columns differ in length");
  for (size_t k = 0; k < n; ++k) {
    if (k > 0 && cov.dates[k].serial <= cov.dates[k - 1].serial)
      raise(Errc::invalid_input, "covariate dates not strictly increasing");
    if (cov.hospital_census[k] < 0)
      raise(Errc::invalid_covariate, "negative hospital census on " + cov.dates[k].to_string());
    if (!(cov.positivity[k] >= 0.0 && cov.positivity[k] <= 1.0))
      raise(Errc::positivity_out_of_range,
            "positivity outside [0,1] on " + cov.dates[k].to_string());
  }
}

void validate_series(const ObservedSeries& series, const CovariatePath& cov) {
  if (series.dates.size() != series.icu_census.size())
    raise(Errc::invalid_input, "series columns differ in length");
  if (series.dates.size() != cov.dates.size())
    raise(Errc::invalid_input, "series and covariates are on different grids");
  for (size_t k = 0; k < series.dates.size(); ++k) {
    if (series.dates[k] != cov.dates[k])
      raise(Errc::invalid_input, "series and covariates are on different grids");
    if (series.icu_census[k] < 0)
      raise(Errc::invalid_input, "negative ICU count on " + series.dates[k].to_string());
  }
}

double immigration_rate_at(const ModelSpec& spec, const ParamVector& params, int h, double p) {
  validate_params(spec, params);
  if (h < 0) raise(Errc::invalid_covariate, "hospital census must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0))
    raise(Errc::invalid_covariate, "positivity must lie in [0,1]");

  const double log_h = std::log(static_cast<double>(h < 1 ? 1 : h));
  double log_rate = std::log(params.alpha);
  if (spec.id == ModelId::M5)
    log_rate += log_h;
  if (params.beta_h) log_rate += *params.beta_h * log_h;
  if (params.beta_hp) log_rate += *params.beta_hp * p * log_h;
  if (params.beta_p) log_rate += *params.beta_p * p;

  const double rate = std::exp(log_rate);
  if (!(rate > 0) || !std::isfinite(rate))
    raise(Errc::degenerate_rate, "immigration rate is not positive and finite");
  return rate;
}

double mean_icu_stay(const ParamVector& params) {
  if (!(params.mu > 0)) raise(Errc::degenerate_rate, "mu must be positive");
  return 1.0 / params.mu;
}

int model_dimension(const ModelSpec& spec) { return spec.parameter_count(); }

std::vector<std::string> parameter_names(const ModelSpec& spec) {
  std::vector<std::string> names{"alpha", "mu"};
  if (spec.has_beta_h()) names.push_back("beta_h");
  if (spec.has_beta_hp()) names.push_back("beta_hp");
  if (spec.has_beta_p()) names.push_back("beta_p");
  return names;
}

std::vector<double> pack_params(const ModelSpec& spec, const ParamVector& params) {
  validate_params(spec, params);
  std::vector<double> flat{params.alpha, params.mu};
  if (spec.has_beta_h()) flat.push_back(*params.beta_h);
  if (spec.has_beta_hp()) flat.push_back(*params.beta_hp);
  if (spec.has_beta_p()) flat.push_back(*params.beta_p);
  return flat;
}

ParamVector unpack_params(const ModelSpec& spec, const std::vector<double>& flat) {
  if (static_cast<int>(flat.size()) != spec.parameter_count())
    raise(Errc::invalid_input, "flat parameter vector has wrong length");
  ParamVector params;
  params.alpha = flat[0];
  params.mu = flat[1];
  size_t k = 2;
  if (spec.has_beta_h()) params.beta_h = flat[k++];
  if (spec.has_beta_hp()) params.beta_hp = flat[k++];
  if (spec.has_beta_p()) params.beta_p = flat[k++];
  return params;
}

}  // namespace idp::model
