#ifndef IDP_INFERENCE_HPP
#define IDP_INFERENCE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idp/kernel.hpp"
#include "idp/model.hpp"

namespace idp::inference {

// Log-likelihood value returned when a required transition probability
// clamps to zero or the parameters leave the numerically representable
// region; keeps the simplex finite-valued instead of producing -inf.
inline constexpr double kLogLikPenalty = -1e10;

struct FitOptions {
  int restarts = 10;
  double simplex_tolerance = 1e-8;  // on objective spread
  int max_iterations = 2000;
  std::uint64_t seed = 0;
  kernel::KernelConfig kernel;
  // Optional extra start on the natural scale (packed order); used for
  // warm starts along the nested model chain.
  std::optional<std::vector<double>> init_hint;

  void validate() const;
};

struct FitResult {
  model::ModelSpec spec;
  model::ParamVector mle;
  double loglik = 0;
  double aic = 0;
  std::vector<std::vector<double>> covariance;          // K x K, natural scale
  std::vector<std::pair<double, double>> intervals;     // per parameter, packed order
  int restarts_agreeing = 0;
  bool converged = false;
};

// Sum over consecutive observation pairs of the log transition probability,
// with the immigration rate held at its value at the left endpoint of each
// interval. Conditions on the first observation.
double log_likelihood(const model::ObservedSeries& series, const model::CovariatePath& cov,
                      const model::ModelSpec& spec, const model::ParamVector& params,
                      const kernel::KernelConfig& cfg = {});

// Maximum likelihood via Nelder-Mead on (log alpha, log mu, betas), from
// `restarts` seeded random starts plus the optional hint; returns the best
// optimum mapped back to the natural scale. Intervals/covariance are not
// filled in; see confidence_intervals.
FitResult fit_mle(const model::ObservedSeries& series, const model::CovariatePath& cov,
                  const model::ModelSpec& spec, const FitOptions& opts = {});

// Central-finite-difference Hessian of -loglik at the MLE on the natural
// scale, inverted to a covariance matrix; intervals are mle +- 1.96*sqrt(a_ii).
FitResult confidence_intervals(FitResult fit, const model::ObservedSeries& series,
                               const model::CovariatePath& cov,
                               const kernel::KernelConfig& cfg = {});

struct SelectionOutcome {
  std::vector<FitResult> ranked;  // ascending AIC
  std::vector<std::pair<model::ModelSpec, std::string>> excluded;
};

// Fits every candidate (warm-starting along the nested family) and ranks by
// AIC; per-candidate failures become excluded entries instead of aborting.
SelectionOutcome select_model(const model::ObservedSeries& series,
                              const model::CovariatePath& cov,
                              const std::vector<model::ModelSpec>& candidates,
                              const FitOptions& opts = {});

}  // namespace idp::inference

#endif
