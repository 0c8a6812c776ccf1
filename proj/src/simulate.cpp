#include "idp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "idp/errors.hpp"
#include "idp/parallel.hpp"

namespace idp::sim {

namespace {

constexpr int kDecrementRetryCap = 1000;

}  // namespace

void StudyConfig::validate() const {
  if (n_sim < 1) raise(Errc::bad_config, "n_sim must be at least 1");
  if (m < 1) raise(Errc::bad_config, "m must be at least 1");
  if (t_max < 1) raise(Errc::bad_config, "t_max must be at least 1");
  if (h0_total < 0) raise(Errc::bad_config, "h0_total must be nonnegative");
  if (i0_per_hospital < 0) raise(Errc::bad_config, "i0_per_hospital must be nonnegative");
  if (!(alpha_true > 0) || !(mu_true > 0))
    raise(Errc::bad_config, "true rates must be positive");
  if (!h_total_path.empty() && static_cast<int>(h_total_path.size()) != t_max + 1)
    raise(Errc::bad_config, "h_total_path must cover days 0..t_max");
}

std::vector<int> default_census_path(int h0, int t_max) {
  std::vector<int> path(t_max + 1);
  const double amplitude = 15.0 * h0;
  for (int t = 0; t <= t_max; ++t) {
    const double s = std::sin(std::numbers::pi * t / (1.15 * t_max));
    path[t] = h0 + static_cast<int>(std::lround(amplitude * s * s));
  }
  return path;
}

std::vector<int> simulate_icu_path(std::span<const double> alpha_by_day, double mu, int i0,
                                   int days, Rng& rng) {
  if (days < 0 || i0 < 0) raise(Errc::invalid_input, "days and i0 must be nonnegative");
  if (static_cast<int>(alpha_by_day.size()) < days)
    raise(Errc::invalid_input, "need an immigration rate for every day");
  if (!(mu >= 0) || !std::isfinite(mu)) raise(Errc::invalid_input, "mu must be nonnegative");
  for (double a : alpha_by_day)
    if (!(a >= 0) || !std::isfinite(a))
      raise(Errc::invalid_input, "immigration rates must be nonnegative");

  std::vector<int> counts(days + 1);
  counts[0] = i0;
  int state = i0;
  for (int day = 0; day < days; ++day) {
    const double admit = alpha_by_day[day];
    double clock = day;
    while (true) {
      const double clear = mu * state;
      const double total = admit + clear;
      if (total <= 0.0) break;  // absorbed until the covariate changes
      const double wait = rng.exponential(total);
      if (clock + wait >= day + 1.0) break;  // next event falls past midnight
      clock += wait;
      if (rng.uniform01() < admit / total)
        ++state;
      else
        --state;
    }
    counts[day + 1] = state;
  }
  return counts;
}

std::vector<int> gillespie_icu(std::span<const int> h_path, double alpha, double mu, int i0,
                               int t_max, Rng& rng) {
  if (static_cast<int>(h_path.size()) < t_max + 1)
    raise(Errc::invalid_input, "h_path must cover every observation day");
  if (!(alpha >= 0)) raise(Errc::invalid_input, "alpha must be nonnegative");
  std::vector<double> alpha_by_day(t_max);
  for (int day = 0; day < t_max; ++day) {
    if (h_path[day] < 0) raise(Errc::invalid_input, "negative hospital census");
    alpha_by_day[day] = alpha * h_path[day];
  }
  if (t_max >= 0 && h_path[t_max] < 0) raise(Errc::invalid_input, "negative hospital census");
  return simulate_icu_path(alpha_by_day, mu, i0, t_max, rng);
}

HospitalPanel disaggregate_hospitals(std::span<const int> h_total, int m, Rng& rng) {
  if (m < 1) raise(Errc::invalid_input, "need at least one hospital");
  if (h_total.empty()) raise(Errc::invalid_input, "empty total path");
  for (int h : h_total)
    if (h < 0) raise(Errc::invalid_input, "negative hospital total");

  const int days = static_cast<int>(h_total.size());
  HospitalPanel panel;
  panel.m = m;
  panel.hospital_beds.assign(days, std::vector<int>(m, 0));
  panel.icu_beds.assign(days, std::vector<int>(m, 0));

  panel.hospital_beds[0] = rng.multinomial_equal(h_total[0], m);
  for (int t = 1; t < days; ++t) {
    const int delta = h_total[t] - h_total[t - 1];
    const auto& prev = panel.hospital_beds[t - 1];
    if (delta == 0) {
      panel.hospital_beds[t] = prev;
      continue;
    }
    const int sign = delta > 0 ? 1 : -1;
    bool placed = false;
    for (int attempt = 0; attempt < kDecrementRetryCap && !placed; ++attempt) {
      const std::vector<int> change = rng.multinomial_equal(std::abs(delta), m);
      std::vector<int> next(m);
      placed = true;
      for (int j = 0; j < m; ++j) {
        next[j] = prev[j] + sign * change[j];
        if (next[j] < 0) {
          placed = false;
          break;
        }
      }
      if (placed) panel.hospital_beds[t] = std::move(next);
    }
    if (!placed) {
      // Equal-weight draws stop finding feasible removals once holdings
      // concentrate; take the beds out one at a time, each occupied bed
      // equally likely, which always fits the totals.
      long held = 0;
      for (int j = 0; j < m; ++j) held += prev[j];
      if (sign > 0 || -delta > held)
        raise(Errc::infeasible_decrement,
              "could not allocate the day " + std::to_string(t) +
                  " change across hospitals");
      std::vector<int> next = prev;
      for (int removal = 0; removal < -delta; ++removal) {
        std::uint64_t pick = rng.below(static_cast<std::uint64_t>(held));
        for (int j = 0; j < m; ++j) {
          if (pick < static_cast<std::uint64_t>(next[j])) {
            --next[j];
            break;
          }
          pick -= next[j];
        }
        --held;
      }
      panel.hospital_beds[t] = std::move(next);
    }
  }
  return panel;
}

AggregatedSeries apply_underreporting_with(const HospitalPanel& panel,
                                           const std::function<int(int, Rng&)>& draw_drops,
                                           Rng& rng) {
  const int days = static_cast<int>(panel.hospital_beds.size());
  AggregatedSeries agg;
  agg.hospital.resize(days);
  agg.icu.resize(days);
  std::vector<char> dropped(panel.m);
  for (int t = 0; t < days; ++t) {
    int gamma = draw_drops(t, rng);
    gamma = std::clamp(gamma, 0, panel.m);
    std::fill(dropped.begin(), dropped.end(), 0);
    if (gamma > 0)
      for (int j : rng.sample_without_replacement(panel.m, gamma)) dropped[j] = 1;
    long h_sum = 0, i_sum = 0;
    for (int j = 0; j < panel.m; ++j) {
      if (dropped[j]) continue;
      h_sum += panel.hospital_beds[t][j];
      i_sum += panel.icu_beds[t][j];
    }
    agg.hospital[t] = static_cast<int>(h_sum);
    agg.icu[t] = static_cast<int>(i_sum);
  }
  return agg;
}

AggregatedSeries apply_underreporting(const HospitalPanel& panel, DropLaw law, Rng& rng) {
  switch (law) {
    case DropLaw::none:
      return apply_underreporting_with(panel, [](int, Rng&) { return 0; }, rng);
    case DropLaw::uniform_0_2:
      return apply_underreporting_with(
          panel, [](int, Rng& r) { return static_cast<int>(r.below(3)); }, rng);
  }
  raise(Errc::invalid_law, "unknown drop law");
}

StudyReport run_study(const StudyConfig& cfg, const inference::FitOptions& opts) {
  cfg.validate();
  opts.validate();

  struct ReplicateRecord {
    double alpha_hat = 0, mu_hat = 0;
    bool alpha_covered = false, mu_covered = false;
  };
  std::vector<std::optional<ReplicateRecord>> records(cfg.n_sim);

  const std::vector<int> h_total =
      cfg.h_total_path.empty() ? default_census_path(cfg.h0_total, cfg.t_max)
                               : cfg.h_total_path;
  const Date base_date = Date::from_ymd(2020, 1, 1);

  parallel_for(cfg.n_sim, [&](int rep) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(rep));
    try {
      HospitalPanel panel = disaggregate_hospitals(h_total, cfg.m, rng);
      panel.seed = cfg.seed;
      std::vector<int> h_col(cfg.t_max + 1);
      for (int j = 0; j < cfg.m; ++j) {
        for (int t = 0; t <= cfg.t_max; ++t) h_col[t] = panel.hospital_beds[t][j];
        const std::vector<int> icu = gillespie_icu(h_col, cfg.alpha_true, cfg.mu_true,
                                                   cfg.i0_per_hospital, cfg.t_max, rng);
        for (int t = 0; t <= cfg.t_max; ++t) panel.icu_beds[t][j] = icu[t];
      }
      const AggregatedSeries agg = apply_underreporting(panel, cfg.drop_law, rng);

      model::ObservedSeries series;
      model::CovariatePath cov;
      for (int t = 0; t <= cfg.t_max; ++t) {
        series.dates.push_back(base_date + t);
        cov.dates.push_back(base_date + t);
      }
      series.icu_census = agg.icu;
      cov.hospital_census = agg.hospital;
      cov.positivity.assign(cfg.t_max + 1, 0.0);

      const model::ModelSpec spec{model::ModelId::M5};
      inference::FitResult fit = inference::fit_mle(series, cov, spec, opts);
      fit = inference::confidence_intervals(fit, series, cov, opts.kernel);

      ReplicateRecord rec;
      rec.alpha_hat = fit.mle.alpha;
      rec.mu_hat = fit.mle.mu;
      rec.alpha_covered = fit.intervals[0].first <= cfg.alpha_true &&
                          cfg.alpha_true <= fit.intervals[0].second;
      rec.mu_covered =
          fit.intervals[1].first <= cfg.mu_true && cfg.mu_true <= fit.intervals[1].second;
      records[rep] = rec;
    } catch (const Error&) {
      // replicate excluded; counted below
    }
  });

  StudyReport report;
  report.n_sim = cfg.n_sim;
  report.alpha.truth = cfg.alpha_true;
  report.mu.truth = cfg.mu_true;
  int kept = 0;
  for (int rep = 0; rep < cfg.n_sim; ++rep) {
    const auto& maybe = records[rep];
    if (!maybe) {
      ++report.n_excluded;
      continue;
    }
    report.replicates.push_back({rep, maybe->alpha_hat, maybe->mu_hat, maybe->alpha_covered,
                                 maybe->mu_covered});
    ++kept;
    report.alpha.mean += maybe->alpha_hat;
    report.mu.mean += maybe->mu_hat;
    report.alpha.mean_relative_error += (maybe->alpha_hat - cfg.alpha_true) / cfg.alpha_true;
    report.mu.mean_relative_error += (maybe->mu_hat - cfg.mu_true) / cfg.mu_true;
    report.alpha.coverage += maybe->alpha_covered ? 1.0 : 0.0;
    report.mu.coverage += maybe->mu_covered ? 1.0 : 0.0;
  }
  if (kept == 0) raise(Errc::degenerate_data, "every replicate failed to fit");
  const double inv = 1.0 / kept;
  report.alpha.mean *= inv;
  report.mu.mean *= inv;
  report.alpha.mean_relative_error *= inv;
  report.mu.mean_relative_error *= inv;
  report.alpha.coverage *= inv;
  report.mu.coverage *= inv;
  report.alpha.bias = report.alpha.mean - cfg.alpha_true;
  report.mu.bias = report.mu.mean - cfg.mu_true;
  report.mean_stay_days = 1.0 / report.mu.mean;
  return report;
}

}  // namespace idp::sim
