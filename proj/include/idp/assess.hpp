#ifndef IDP_ASSESS_HPP
#define IDP_ASSESS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "idp/inference.hpp"
#include "idp/model.hpp"

namespace idp::assess {

// Pointwise middle-95% envelope of simulated occupancy trajectories.
// Percentiles are linearly interpolated order statistics, rounded outward
// to integer counts.
struct QuantileBand {
  std::vector<Date> dates;
  std::vector<int> lower;
  std::vector<int> upper;
  int n_replicates = 0;
};

struct BacktestPlan {
  std::vector<std::pair<Date, Date>> phases;  // inclusive, ordered, disjoint
  int holdout_weeks = 3;
  int horizon_days = 7;
  int n_forecasts = 100;

  void validate() const;
};

// Pointwise 2.5/97.5 percentile band of trajectories[replicate][day]:
// order statistics interpolated linearly, lower floored, upper ceiled.
QuantileBand envelope_of(const std::vector<Date>& dates,
                         const std::vector<std::vector<int>>& trajectories);

// Simulates n_rep trajectories from the fitted rates conditional on the
// observed covariates, starting every trajectory at i0 on the first grid
// day, and returns the pointwise 2.5/97.5 percentile envelope.
QuantileBand replicate_band(const inference::FitResult& fit, const model::CovariatePath& cov,
                            int i0, int n_rep, std::uint64_t seed = 0);

struct WeekForecast {
  int phase = 0;  // 1-based
  int week = 0;   // 1-based within its phase
  Date train_start;
  Date train_end;  // last observation used for fitting
  QuantileBand band;
  int days_covered = 0;
  int days_total = 0;
};

struct BacktestReport {
  std::vector<WeekForecast> weeks;
  double coverage = 0;  // pooled share of held-out days inside the band
  std::vector<std::pair<int, std::string>> skipped_phases;
};

// Phase-wise weekly rolling forecasts with an expanding window: per phase,
// fit on everything up to holdout_weeks weeks before the phase end, simulate
// n_forecasts week-ahead trajectories from the last observed count under the
// observed covariates, record the predictive envelope, then grow the window
// by one week and repeat. Phases with too little training data are skipped
// with a reason; the remaining phases still run.
BacktestReport rolling_forecast(const model::ObservedSeries& series,
                                const model::CovariatePath& cov,
                                const std::vector<model::ModelSpec>& spec_per_phase,
                                const BacktestPlan& plan, const inference::FitOptions& opts,
                                std::uint64_t seed = 0);

}  // namespace idp::assess

#endif
