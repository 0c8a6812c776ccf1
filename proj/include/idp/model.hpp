#ifndef IDP_MODEL_HPP
#define IDP_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "idp/dates.hpp"

namespace idp::model {

// Candidate immigration-rate parametrizations. All are log-linear in the
// covariates; they differ in which terms are free:
//   M1: log a + bH*log(h) + bHP*p*log(h) + bP*p
//   M2: log a + bH*log(h) + bHP*p*log(h)
//   M3: log a + bH*log(h) + bP*p
//   M4: log a + bH*log(h)
//   M5: log a + log(h)          (bH pinned to 1, no free coefficient)
// The clearance rate mu is a free parameter in every model.
enum class ModelId { M1, M2, M3, M4, M5 };

struct ModelSpec {
  ModelId id = ModelId::M5;

  int parameter_count() const;  // free parameters, mu included
  bool has_beta_h() const;      // free log-census coefficient
  bool has_beta_hp() const;     // positivity x log-census interaction
  bool has_beta_p() const;      // positivity main effect
  std::string name() const;

  static ModelSpec from_name(const std::string& name);
  static std::vector<ModelSpec> all();

  auto operator<=>(const ModelSpec&) const = default;
};

// Natural-scale parameter values. Coefficients the chosen model does not
// include stay disengaged (nullopt), they are never zero placeholders.
struct ParamVector {
  double alpha = 0;  // baseline immigration intensity, > 0
  double mu = 0;     // per-patient clearance rate, > 0
  std::optional<double> beta_h;
  std::optional<double> beta_hp;
  std::optional<double> beta_p;
};

// Daily exogenous covariates on a contiguous day grid.
struct CovariatePath {
  std::vector<Date> dates;
  std::vector<int> hospital_census;  // H(t) >= 0
  std::vector<double> positivity;    // P(t) in [0, 1]
};

// Daily ICU occupancy counts observed on the same grid as its covariates.
struct ObservedSeries {
  std::vector<Date> dates;
  std::vector<int> icu_census;
};

// Throws invalid_input when the active coefficients of `params` do not
// match `spec` or when alpha/mu violate positivity.
void validate_params(const ModelSpec& spec, const ParamVector& params);

// Throws invalid_input when a path/series breaks its own invariants
// (unsorted or gapped grid, negative counts, positivity outside [0,1]).
void validate_covariates(const CovariatePath& cov);
void validate_series(const ObservedSeries& series, const CovariatePath& cov);

// Immigration rate at covariate values (h, p) under the given model.
// Zero-census days enter the log terms as log(max(h, 1)).
double immigration_rate_at(const ModelSpec& spec, const ParamVector& params, int h, double p);

// Mean per-patient ICU stay in days, 1/mu.
double mean_icu_stay(const ParamVector& params);

int model_dimension(const ModelSpec& spec);

// Canonical flat ordering of the free parameters, used by the optimizer,
// the information matrix, and reports.
std::vector<std::string> parameter_names(const ModelSpec& spec);
std::vector<double> pack_params(const ModelSpec& spec, const ParamVector& params);
ParamVector unpack_params(const ModelSpec& spec, const std::vector<double>& flat);

}  // namespace idp::model

#endif
