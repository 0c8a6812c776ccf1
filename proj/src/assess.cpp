#include "idp/assess.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "idp/errors.hpp"
#include "idp/rng.hpp"
#include "idp/simulate.hpp"

namespace idp::assess {

namespace {

// Linear interpolation between order statistics of a sorted sample.
double quantile_sorted(const std::vector<int>& sorted, double p) {
  const size_t n = sorted.size();
  const double pos = p * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= n) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

QuantileBand envelope_of(const std::vector<Date>& dates,
                         const std::vector<std::vector<int>>& trajectories) {
  QuantileBand band;
  band.dates = dates;
  band.n_replicates = static_cast<int>(trajectories.size());
  const size_t days = dates.size();
  band.lower.resize(days);
  band.upper.resize(days);
  std::vector<int> column(trajectories.size());
  for (size_t d = 0; d < days; ++d) {
    for (size_t r = 0; r < trajectories.size(); ++r) column[r] = trajectories[r][d];
    std::sort(column.begin(), column.end());
    band.lower[d] = static_cast<int>(std::floor(quantile_sorted(column, 0.025)));
    band.upper[d] = static_cast<int>(std::ceil(quantile_sorted(column, 0.975)));
  }
  return band;
}

namespace {

std::vector<double> rate_path(const inference::FitResult& fit, const model::CovariatePath& cov,
                              size_t from, size_t days) {
  std::vector<double> rates(days);
  for (size_t d = 0; d < days; ++d)
    rates[d] = model::immigration_rate_at(fit.spec, fit.mle, cov.hospital_census[from + d],
                                          cov.positivity[from + d]);
  return rates;
}

size_t index_of(const std::vector<Date>& dates, Date d, const char* what) {
  const auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d)
    raise(Errc::insufficient_data, std::string(what) + " " + d.to_string() + " not in the data");
  return static_cast<size_t>(it - dates.begin());
}

}  // namespace

void BacktestPlan::validate() const {
  if (phases.empty()) raise(Errc::bad_config, "backtest plan needs at least one phase");
  for (size_t i = 0; i < phases.size(); ++i) {
    if (phases[i].second < phases[i].first)
      raise(Errc::bad_config, "phase end precedes phase start");
    if (i > 0 && phases[i].first <= phases[i - 1].second)
      raise(Errc::bad_config, "phases must be ordered and non-overlapping");
  }
  if (holdout_weeks < 1) raise(Errc::bad_config, "holdout_weeks must be at least 1");
  if (horizon_days < 1) raise(Errc::bad_config, "horizon_days must be at least 1");
  if (n_forecasts < 2) raise(Errc::bad_config, "n_forecasts must be at least 2");
}

QuantileBand replicate_band(const inference::FitResult& fit, const model::CovariatePath& cov,
                            int i0, int n_rep, std::uint64_t seed) {
  if (!fit.converged) raise(Errc::invalid_input, "fit did not converge");
  if (n_rep < 2) raise(Errc::invalid_input, "need at least two replicates");
  if (i0 < 0) raise(Errc::invalid_input, "i0 must be nonnegative");
  model::validate_covariates(cov);
  if (cov.dates.empty()) raise(Errc::insufficient_data, "empty covariate path");

  const size_t days = cov.dates.size() - 1;
  const std::vector<double> rates = rate_path(fit, cov, 0, days);
  std::vector<std::vector<int>> trajectories(n_rep);
  for (int r = 0; r < n_rep; ++r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    trajectories[r] =
        sim::simulate_icu_path(rates, fit.mle.mu, i0, static_cast<int>(days), rng);
  }
  return envelope_of(cov.dates, trajectories);
}

BacktestReport rolling_forecast(const model::ObservedSeries& series,
                                const model::CovariatePath& cov,
                                const std::vector<model::ModelSpec>& spec_per_phase,
                                const BacktestPlan& plan, const inference::FitOptions& opts,
                                std::uint64_t seed) {
  plan.validate();
  opts.validate();
  model::validate_covariates(cov);
  model::validate_series(series, cov);
  if (spec_per_phase.size() != plan.phases.size())
    raise(Errc::invalid_input, "need one model per phase");

  BacktestReport report;
  long covered_total = 0, days_total = 0;

  for (size_t ph = 0; ph < plan.phases.size(); ++ph) {
    const auto [phase_start, phase_end] = plan.phases[ph];
    const model::ModelSpec spec = spec_per_phase[ph];
    try {
      const size_t start_idx = index_of(series.dates, phase_start, "phase start");
      const size_t end_idx = index_of(series.dates, phase_end, "phase end");
      const int holdout_days = plan.holdout_weeks * plan.horizon_days;
      if (static_cast<int>(end_idx - start_idx) < holdout_days)
        raise(Errc::insufficient_data, "phase shorter than its holdout");
      const size_t initial_train_end = end_idx - static_cast<size_t>(holdout_days);
      if (static_cast<int>(initial_train_end - start_idx) + 1 < spec.parameter_count() + 2)
        raise(Errc::insufficient_data, "initial training window too short for " + spec.name());

      std::optional<std::vector<double>> carry_hint;
      for (int week = 0; week < plan.holdout_weeks; ++week) {
        const size_t train_end =
            initial_train_end + static_cast<size_t>(week) * plan.horizon_days;

        model::ObservedSeries train_series;
        model::CovariatePath train_cov;
        train_series.dates.assign(series.dates.begin() + start_idx,
                                  series.dates.begin() + train_end + 1);
        train_series.icu_census.assign(series.icu_census.begin() + start_idx,
                                       series.icu_census.begin() + train_end + 1);
        train_cov.dates = train_series.dates;
        train_cov.hospital_census.assign(cov.hospital_census.begin() + start_idx,
                                         cov.hospital_census.begin() + train_end + 1);
        train_cov.positivity.assign(cov.positivity.begin() + start_idx,
                                    cov.positivity.begin() + train_end + 1);

        inference::FitOptions local = opts;
        local.init_hint = carry_hint;
        const inference::FitResult fit = inference::fit_mle(train_series, train_cov, spec, local);
        carry_hint = model::pack_params(spec, fit.mle);

        // Week-ahead trajectories start from the last observed count and run
        // under the observed covariates across the forecast week.
        const int i0 = series.icu_census[train_end];
        std::vector<double> rates(plan.horizon_days);
        for (int d = 0; d < plan.horizon_days; ++d)
          rates[d] = model::immigration_rate_at(spec, fit.mle,
                                                cov.hospital_census[train_end + d],
                                                cov.positivity[train_end + d]);

        std::vector<std::vector<int>> paths(plan.n_forecasts);
        for (int r = 0; r < plan.n_forecasts; ++r) {
          Rng rng(seed, (static_cast<std::uint64_t>(ph * 64 + week) << 32) |
                            static_cast<std::uint64_t>(r));
          const std::vector<int> full =
              sim::simulate_icu_path(rates, fit.mle.mu, i0, plan.horizon_days, rng);
          paths[r].assign(full.begin() + 1, full.end());  // days 1..horizon
        }
        std::vector<Date> forecast_dates(plan.horizon_days);
        for (int d = 0; d < plan.horizon_days; ++d)
          forecast_dates[d] = series.dates[train_end + 1 + d];

        WeekForecast wf;
        wf.phase = static_cast<int>(ph) + 1;
        wf.week = week + 1;
        wf.train_start = series.dates[start_idx];
        wf.train_end = series.dates[train_end];
        wf.band = envelope_of(forecast_dates, paths);
        wf.days_total = plan.horizon_days;
        for (int d = 0; d < plan.horizon_days; ++d) {
          const int observed = series.icu_census[train_end + 1 + d];
          if (wf.band.lower[d] <= observed && observed <= wf.band.upper[d]) ++wf.days_covered;
        }
        covered_total += wf.days_covered;
        days_total += wf.days_total;
        report.weeks.push_back(std::move(wf));
      }
    } catch (const Error& e) {
      report.skipped_phases.emplace_back(static_cast<int>(ph) + 1, e.what());
    }
  }

  report.coverage = days_total > 0 ? static_cast<double>(covered_total) / days_total : 0.0;
  return report;
}

}  // namespace idp::assess
