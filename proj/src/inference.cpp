#include "idp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "idp/errors.hpp"
#include "idp/rng.hpp"

namespace idp::inference {

namespace {

constexpr double kPenaltyObjective = -kLogLikPenalty;  // minimizer-side value
constexpr double kAgreementTol = 1e-4;

// ---------------------------------------------------------------------------
// Nelder-Mead simplex minimizer (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5), terminating on the spread of objective values across the
// simplex. Penalty plateaus (every vertex at the penalty value) abort early
// so a bad restart does not burn the whole iteration budget.
// ---------------------------------------------------------------------------

struct NmOutcome {
  std::vector<double> x;
  double fx = 0;
  bool converged = false;
  int iterations = 0;
};

NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& x0, double tol, int max_iter) {
  const size_t dim = x0.size();
  std::vector<std::vector<double>> vertex(dim + 1, x0);
  for (size_t i = 0; i < dim; ++i)
    vertex[i + 1][i] += (x0[i] != 0.0) ? 0.05 * x0[i] : 0.00025;

  std::vector<double> value(dim + 1);
  for (size_t i = 0; i <= dim; ++i) value[i] = f(vertex[i]);

  std::vector<size_t> order(dim + 1);
  NmOutcome out;
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return value[a] < value[b]; });
    const size_t best = order[0], second_worst = order[dim - 1], worst = order[dim];

    if (value[worst] - value[best] <= tol && value[best] < kPenaltyObjective * 0.5) {
      out.converged = true;
      break;
    }
    if (out.iterations >= 100 && value[best] >= kPenaltyObjective * 0.5) break;

    std::vector<double> centroid(dim, 0.0);
    for (size_t i = 0; i <= dim; ++i) {
      if (i == worst) continue;
      for (size_t d = 0; d < dim; ++d) centroid[d] += vertex[i][d];
    }
    for (size_t d = 0; d < dim; ++d) centroid[d] /= static_cast<double>(dim);

    auto blend = [&](double coef) {
      std::vector<double> p(dim);
      for (size_t d = 0; d < dim; ++d)
        p[d] = centroid[d] + coef * (vertex[worst][d] - centroid[d]);
      return p;
    };

    const std::vector<double> reflected = blend(-1.0);
    const double f_reflected = f(reflected);
    if (f_reflected < value[order[0]]) {
      const std::vector<double> expanded = blend(-2.0);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        vertex[worst] = expanded;
        value[worst] = f_expanded;
      } else {
        vertex[worst] = reflected;
        value[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < value[second_worst]) {
      vertex[worst] = reflected;
      value[worst] = f_reflected;
      continue;
    }
    if (f_reflected < value[worst]) {
      const std::vector<double> outside = blend(-0.5);
      const double f_outside = f(outside);
      if (f_outside <= f_reflected) {
        vertex[worst] = outside;
        value[worst] = f_outside;
        continue;
      }
    } else {
      const std::vector<double> inside = blend(0.5);
      const double f_inside = f(inside);
      if (f_inside < value[worst]) {
        vertex[worst] = inside;
        value[worst] = f_inside;
        continue;
      }
    }
    for (size_t i = 0; i <= dim; ++i) {  // shrink toward the best vertex
      if (i == best) continue;
      for (size_t d = 0; d < dim; ++d)
        vertex[i][d] = vertex[best][d] + 0.5 * (vertex[i][d] - vertex[best][d]);
      value[i] = f(vertex[i]);
    }
  }

  const size_t best =
      static_cast<size_t>(std::min_element(value.begin(), value.end()) - value.begin());
  out.x = vertex[best];
  out.fx = value[best];
  return out;
}

// ---------------------------------------------------------------------------
// Parameter transforms: the optimizer works on (log alpha, log mu, betas).
// ---------------------------------------------------------------------------

std::vector<double> to_search_space(const std::vector<double>& natural) {
  std::vector<double> x = natural;
  x[0] = std::log(natural[0]);
  x[1] = std::log(natural[1]);
  return x;
}

std::vector<double> to_natural_space(const std::vector<double>& x) {
  std::vector<double> natural = x;
  natural[0] = std::exp(x[0]);
  natural[1] = std::exp(x[1]);
  return natural;
}

// ---------------------------------------------------------------------------
// Dense K x K helpers for the observed information matrix (K <= 5).
// ---------------------------------------------------------------------------

double norm1(const std::vector<std::vector<double>>& m) {
  double best = 0;
  for (size_t j = 0; j < m.size(); ++j) {
    double col = 0;
    for (size_t i = 0; i < m.size(); ++i) col += std::abs(m[i][j]);
    best = std::max(best, col);
  }
  return best;
}

// Gauss-Jordan with partial pivoting; false on a vanishing pivot.
bool invert(std::vector<std::vector<double>> a, std::vector<std::vector<double>>& out) {
  const size_t n = a.size();
  out.assign(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) out[i][i] = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0 || !std::isfinite(a[pivot][col])) return false;
    std::swap(a[col], a[pivot]);
    std::swap(out[col], out[pivot]);
    const double inv_pivot = 1.0 / a[col][col];
    for (size_t c = 0; c < n; ++c) {
      a[col][c] *= inv_pivot;
      out[col][c] *= inv_pivot;
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[r][col];
      if (factor == 0.0) continue;
      for (size_t c = 0; c < n; ++c) {
        a[r][c] -= factor * a[col][c];
        out[r][c] -= factor * out[col][c];
      }
    }
  }
  return true;
}

// Likelihood core shared by the one-shot entry point and the optimizer: one
// transition engine per interval length, re-targeted in place when the
// clearance rate moves, so repeated evaluations recycle their spectra.
class SeriesEvaluator {
 public:
  SeriesEvaluator(const model::ObservedSeries& series, const model::CovariatePath& cov,
                  const model::ModelSpec& spec, const kernel::KernelConfig& cfg)
      : series_(series), cov_(cov), spec_(spec), cfg_(cfg),
        census_proportional_(spec.id == model::ModelId::M5) {}

  double loglik(const model::ParamVector& params) {
    if (engines_.empty()) {
      for (size_t k = 0; k + 1 < series_.dates.size(); ++k) {
        const int dt = series_.dates[k + 1] - series_.dates[k];
        if (!engines_.count(dt))
          engines_.emplace(dt,
                           kernel::TransitionEngine(params.mu, static_cast<double>(dt), cfg_));
      }
    } else if (params.mu != bound_mu_) {
      for (auto& [dt, engine] : engines_) engine.rebind(params.mu);
    }
    bound_mu_ = params.mu;

    double total = 0;
    for (size_t k = 0; k + 1 < series_.dates.size(); ++k) {
      const int dt = series_.dates[k + 1] - series_.dates[k];
      kernel::TransitionEngine& engine = engines_.find(dt)->second;
      double p;
      if (census_proportional_) {
        p = engine.prob_scaled(series_.icu_census[k], series_.icu_census[k + 1], params.alpha,
                               std::max(1, cov_.hospital_census[k]));
      } else {
        const double alpha_eff = model::immigration_rate_at(
            spec_, params, cov_.hospital_census[k], cov_.positivity[k]);
        p = engine.prob(series_.icu_census[k], series_.icu_census[k + 1], alpha_eff);
      }
      if (p <= 0.0) return kLogLikPenalty;
      total += std::log(p);
    }
    return total;
  }

 private:
  const model::ObservedSeries& series_;
  const model::CovariatePath& cov_;
  const model::ModelSpec& spec_;
  kernel::KernelConfig cfg_;
  bool census_proportional_;
  std::map<int, kernel::TransitionEngine> engines_;
  double bound_mu_ = -1;
};

struct Objective {
  const model::ModelSpec& spec;
  SeriesEvaluator evaluator;

  Objective(const model::ObservedSeries& series, const model::CovariatePath& cov,
            const model::ModelSpec& spec_, const kernel::KernelConfig& cfg)
      : spec(spec_), evaluator(series, cov, spec_, cfg) {}

  // Negated log-likelihood on the natural scale, with the penalty value for
  // parameter points outside the computable region.
  double natural(const std::vector<double>& flat) {
    if (!(flat[0] > 0) || !std::isfinite(flat[0])) return kPenaltyObjective;
    if (!(flat[1] >= kernel::kMuFloor) || !std::isfinite(flat[1])) return kPenaltyObjective;
    for (double v : flat)
      if (!std::isfinite(v)) return kPenaltyObjective;
    double ll;
    try {
      ll = evaluator.loglik(model::unpack_params(spec, flat));
    } catch (const Error& e) {
      if (e.code() == Errc::aliasing_risk || e.code() == Errc::degenerate_rate)
        return kPenaltyObjective;
      throw;
    }
    if (!std::isfinite(ll) || ll <= kLogLikPenalty) return kPenaltyObjective;
    return -ll;
  }

  double transformed(const std::vector<double>& x) { return natural(to_natural_space(x)); }
};

std::vector<double> random_start(const model::ModelSpec& spec, Rng& rng) {
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };
  std::vector<double> x;
  x.push_back(uniform(std::log(0.01), std::log(3.0)));  // log alpha
  x.push_back(uniform(std::log(0.01), std::log(3.0)));  // log mu
  if (spec.has_beta_h()) x.push_back(uniform(-2.0, 2.0));
  if (spec.has_beta_hp()) x.push_back(uniform(-2.0, 2.0));
  if (spec.has_beta_p()) x.push_back(uniform(0.0, 30.0));
  return x;
}

}  // namespace

void FitOptions::validate() const {
  if (restarts < 1) raise(Errc::bad_config, "restarts must be at least 1");
  if (!(simplex_tolerance > 0)) raise(Errc::bad_config, "simplex_tolerance must be positive");
  if (max_iterations < 1) raise(Errc::bad_config, "max_iterations must be at least 1");
  kernel.validate();
}

double log_likelihood(const model::ObservedSeries& series, const model::CovariatePath& cov,
                      const model::ModelSpec& spec, const model::ParamVector& params,
                      const kernel::KernelConfig& cfg) {
  cfg.validate();
  model::validate_params(spec, params);
  model::validate_covariates(cov);
  model::validate_series(series, cov);
  const size_t n = series.icu_census.size();
  if (n < 2) raise(Errc::insufficient_data, "need at least two observations");
  for (int count : series.icu_census)
    if (count >= cfg.n_grid)
      raise(Errc::state_overflow, "observed count does not fit the transition grid");

  SeriesEvaluator evaluator(series, cov, spec, cfg);
  return evaluator.loglik(params);
}

FitResult fit_mle(const model::ObservedSeries& series, const model::CovariatePath& cov,
                  const model::ModelSpec& spec, const FitOptions& opts) {
  opts.validate();
  model::validate_covariates(cov);
  model::validate_series(series, cov);
  const int K = spec.parameter_count();
  if (static_cast<int>(series.icu_census.size()) < K + 2)
    raise(Errc::insufficient_data,
          "series too short for " + spec.name() + ": need at least " + std::to_string(K + 2) +
              " observations");
  if (std::all_of(series.icu_census.begin(), series.icu_census.end(),
                  [](int c) { return c == 0; }))
    raise(Errc::degenerate_data, "series is identically zero");
  for (int count : series.icu_census)
    if (count >= opts.kernel.n_grid)
      raise(Errc::state_overflow, "observed count does not fit the transition grid");

  Objective objective(series, cov, spec, opts.kernel);
  auto f = [&](const std::vector<double>& x) { return objective.transformed(x); };

  std::vector<std::vector<double>> starts;
  if (opts.init_hint) {
    if (static_cast<int>(opts.init_hint->size()) != K)
      raise(Errc::bad_config, "init_hint has wrong length");
    starts.push_back(to_search_space(*opts.init_hint));
  }
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng(opts.seed, static_cast<std::uint64_t>(r));
    // The simplex cannot walk out of the penalty plateau, so reject starts
    // that land there (e.g. mean occupancy past the grid).
    std::vector<double> start = random_start(spec, rng);
    for (int attempt = 0; attempt < 50 && f(start) >= kPenaltyObjective * 0.5; ++attempt)
      start = random_start(spec, rng);
    starts.push_back(std::move(start));
  }

  std::vector<NmOutcome> runs;
  runs.reserve(starts.size());
  for (const auto& start : starts)
    runs.push_back(nelder_mead(f, start, opts.simplex_tolerance, opts.max_iterations));

  size_t best = 0;
  for (size_t r = 1; r < runs.size(); ++r)
    if (runs[r].fx < runs[best].fx) best = r;

  if (std::none_of(runs.begin(), runs.end(), [](const NmOutcome& o) { return o.converged; }))
    raise(Errc::non_convergence, "no restart converged within the iteration budget");

  int agreeing = 0;
  for (const auto& run : runs)
    if (run.fx <= runs[best].fx + kAgreementTol) ++agreeing;

  FitResult fit;
  fit.spec = spec;
  fit.mle = model::unpack_params(spec, to_natural_space(runs[best].x));
  fit.loglik = -runs[best].fx;
  fit.aic = -2.0 * fit.loglik + 2.0 * K;
  fit.restarts_agreeing = agreeing;
  fit.converged = runs[best].converged;
  return fit;
}

FitResult confidence_intervals(FitResult fit, const model::ObservedSeries& series,
                               const model::CovariatePath& cov,
                               const kernel::KernelConfig& cfg) {
  if (!fit.converged) raise(Errc::invalid_input, "fit did not converge");
  const int K = fit.spec.parameter_count();
  const std::vector<double> theta = model::pack_params(fit.spec, fit.mle);
  Objective objective(series, cov, fit.spec, cfg);

  // Per-coordinate steps, kept clear of the positivity boundary for alpha/mu.
  std::vector<double> step(K);
  for (int i = 0; i < K; ++i) {
    step[i] = 1e-4 * std::max(std::abs(theta[i]), 1.0);
    if (i < 2) step[i] = std::min(step[i], 0.49 * theta[i]);
  }

  auto at = [&](int i, double di, int j, double dj) {
    std::vector<double> point = theta;
    point[i] += di;
    if (j >= 0) point[j] += dj;
    return objective.natural(point);
  };

  std::vector<std::vector<double>> hessian(K, std::vector<double>(K, 0.0));
  const double f0 = objective.natural(theta);
  for (int i = 0; i < K; ++i)
    hessian[i][i] = (at(i, step[i], -1, 0) - 2.0 * f0 + at(i, -step[i], -1, 0)) /
                    (step[i] * step[i]);
  for (int i = 0; i < K; ++i) {
    for (int j = i + 1; j < K; ++j) {
      const double val = (at(i, step[i], j, step[j]) - at(i, step[i], j, -step[j]) -
                          at(i, -step[i], j, step[j]) + at(i, -step[i], j, -step[j])) /
                         (4.0 * step[i] * step[j]);
      hessian[i][j] = val;
      hessian[j][i] = val;
    }
  }

  std::vector<std::vector<double>> covariance;
  if (!invert(hessian, covariance))
    raise(Errc::singular_information, "observed information matrix is not invertible");
  if (norm1(hessian) * norm1(covariance) > 1e12)
    raise(Errc::singular_information, "observed information matrix is ill-conditioned");
  for (int i = 0; i < K; ++i)
    if (covariance[i][i] < 0)
      raise(Errc::non_psd, "inverse information has a negative variance");

  fit.covariance = std::move(covariance);
  fit.intervals.resize(K);
  for (int i = 0; i < K; ++i) {
    const double half_width = 1.96 * std::sqrt(fit.covariance[i][i]);
    fit.intervals[i] = {theta[i] - half_width, theta[i] + half_width};
  }
  return fit;
}

SelectionOutcome select_model(const model::ObservedSeries& series,
                              const model::CovariatePath& cov,
                              const std::vector<model::ModelSpec>& candidates,
                              const FitOptions& opts) {
  if (candidates.size() < 2) raise(Errc::invalid_input, "need at least two candidate models");

  // Fit small models first so each larger model can warm-start from its
  // nested parent, which also keeps maximized likelihoods monotone along
  // the nesting chain.
  std::vector<model::ModelSpec> order = candidates;
  std::stable_sort(order.begin(), order.end(),
                   [](const model::ModelSpec& a, const model::ModelSpec& b) {
                     if (a.parameter_count() != b.parameter_count())
                       return a.parameter_count() < b.parameter_count();
                     return a.id > b.id;
                   });

  std::map<model::ModelId, FitResult> fits;
  SelectionOutcome outcome;
  for (const model::ModelSpec& spec : order) {
    FitOptions local = opts;
    local.init_hint.reset();

    auto parent_hint = [&](model::ModelId parent,
                           auto expand) -> std::optional<std::vector<double>> {
      auto it = fits.find(parent);
      if (it == fits.end()) return std::nullopt;
      return expand(it->second.mle);
    };
    switch (spec.id) {
      case model::ModelId::M4:
        local.init_hint = parent_hint(model::ModelId::M5, [](const model::ParamVector& p) {
          return std::vector<double>{p.alpha, p.mu, 1.0};
        });
        break;
      case model::ModelId::M3:
        local.init_hint = parent_hint(model::ModelId::M4, [](const model::ParamVector& p) {
          return std::vector<double>{p.alpha, p.mu, *p.beta_h, 0.0};
        });
        break;
      case model::ModelId::M2:
        local.init_hint = parent_hint(model::ModelId::M4, [](const model::ParamVector& p) {
          return std::vector<double>{p.alpha, p.mu, *p.beta_h, 0.0};
        });
        break;
      case model::ModelId::M1: {
        auto m3 = fits.find(model::ModelId::M3);
        auto m2 = fits.find(model::ModelId::M2);
        const FitResult* parent = nullptr;
        if (m3 != fits.end()) parent = &m3->second;
        if (m2 != fits.end() && (!parent || m2->second.loglik > parent->loglik))
          parent = &m2->second;
        if (parent) {
          const model::ParamVector& p = parent->mle;
          local.init_hint = std::vector<double>{p.alpha, p.mu, *p.beta_h,
                                                p.beta_hp.value_or(0.0),
                                                p.beta_p.value_or(0.0)};
        }
        break;
      }
      default:
        break;
    }

    try {
      fits[spec.id] = fit_mle(series, cov, spec, local);
    } catch (const Error& e) {
      outcome.excluded.emplace_back(spec, e.what());
    }
  }

  for (const model::ModelSpec& spec : candidates)
    if (auto it = fits.find(spec.id); it != fits.end()) outcome.ranked.push_back(it->second);
  std::stable_sort(outcome.ranked.begin(), outcome.ranked.end(),
                   [](const FitResult& a, const FitResult& b) {
                     if (a.aic != b.aic) return a.aic < b.aic;
                     if (a.spec.parameter_count() != b.spec.parameter_count())
                       return a.spec.parameter_count() < b.spec.parameter_count();
                     return a.spec.id < b.spec.id;
                   });
  return outcome;
}

}  // namespace idp::inference
