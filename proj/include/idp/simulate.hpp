#ifndef IDP_SIMULATE_HPP
#define IDP_SIMULATE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "idp/inference.hpp"
#include "idp/model.hpp"
#include "idp/rng.hpp"

namespace idp::sim {

// Synthetic multi-hospital panel: rows are days 0..t_max, columns hospitals.
struct HospitalPanel {
  std::vector<std::vector<int>> hospital_beds;  // (t_max+1) x m
  std::vector<std::vector<int>> icu_beds;       // (t_max+1) x m
  int m = 0;
  std::uint64_t seed = 0;
};

enum class DropLaw { none, uniform_0_2 };

struct StudyConfig {
  double alpha_true = 0.1;
  double mu_true = 0.2;
  int m = 25;
  int t_max = 200;
  int h0_total = 43;
  int i0_per_hospital = 1;
  int n_sim = 1000;
  DropLaw drop_law = DropLaw::none;
  std::uint64_t seed = 0;
  // Aggregate daily bed totals driving every replicate; empty selects the
  // default epidemic-wave path from default_census_path.
  std::vector<int> h_total_path;

  void validate() const;
};

// Deterministic single-wave census totals at outbreak scale: starts exactly
// at h0, peaks near 16*h0 at 57% of the horizon, and recedes.
std::vector<int> default_census_path(int h0, int t_max);

// Event-by-event simulation of the occupancy process over integer days
// 0..days, with a piecewise-constant immigration rate alpha_by_day[d] on day
// d and per-patient clearance rate mu. The clearance rate tracks the current
// state after every event; a waiting time that crosses midnight produces no
// event and the clock advances to the day boundary. Returns days+1 counts.
std::vector<int> simulate_icu_path(std::span<const double> alpha_by_day, double mu, int i0,
                                   int days, Rng& rng);

// Occupancy of one hospital whose admissions scale with its own daily bed
// census: immigration runs at alpha * h_path[day].
std::vector<int> gillespie_icu(std::span<const int> h_path, double alpha, double mu, int i0,
                               int t_max, Rng& rng);

// Splits aggregate daily bed totals across m hospitals: day-0 counts are
// equally-weighted multinomial, daily changes are multinomial draws of the
// absolute change with the sign applied, resampled when cumulative sums
// would drive a hospital negative. Only fills the hospital side of a panel.
HospitalPanel disaggregate_hospitals(std::span<const int> h_total, int m, Rng& rng);

struct AggregatedSeries {
  std::vector<int> hospital;
  std::vector<int> icu;
};

// Daily totals over the panel after removing gamma_t hospitals drawn by the
// law each day (the same hospitals vanish from both bed and ICU sums).
AggregatedSeries apply_underreporting(const HospitalPanel& panel, DropLaw law, Rng& rng);

// Same, with an arbitrary per-day drop-count sampler (used by tests).
AggregatedSeries apply_underreporting_with(const HospitalPanel& panel,
                                           const std::function<int(int, Rng&)>& draw_drops,
                                           Rng& rng);

struct ParameterSummary {
  double truth = 0;
  double mean = 0;            // average MLE across replicates
  double bias = 0;            // mean - truth
  double mean_relative_error = 0;
  double coverage = 0;        // fraction of 95% intervals containing truth
};

struct StudyReport {
  ParameterSummary alpha;
  ParameterSummary mu;
  double mean_stay_days = 0;  // reciprocal of the average clearance estimate
  int n_sim = 0;
  int n_excluded = 0;
  // per-replicate trace (fitted replicates only, in replicate order)
  struct Replicate {
    int index = 0;
    double alpha_hat = 0;
    double mu_hat = 0;
    bool alpha_covered = false;
    bool mu_covered = false;
  };
  std::vector<Replicate> replicates;
};

// Full bias/coverage experiment: per replicate, build a panel, simulate
// per-hospital ICU occupancy, aggregate (dropping reporters if configured),
// fit the census-proportional model by maximum likelihood, and pool
// estimates and interval hits across replicates.
StudyReport run_study(const StudyConfig& cfg, const inference::FitOptions& opts);

}  // namespace idp::sim

#endif
