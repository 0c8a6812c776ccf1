#include "idp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "idp/assess.hpp"
#include "idp/errors.hpp"
#include "idp/inference.hpp"
#include "idp/io.hpp"
#include "idp/model.hpp"
#include "idp/simulate.hpp"

namespace idp::cli {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

sim::DropLaw parse_drop_law(const std::string& text) {
  if (text == "none") return sim::DropLaw::none;
  if (text == "uniform_0_2") return sim::DropLaw::uniform_0_2;
  raise(Errc::invalid_law, "unknown drop law '" + text + "', expected none or uniform_0_2");
}

inference::FitOptions fit_options(const RunConfig& cfg) {
  inference::FitOptions opts;
  opts.restarts = cfg.restarts;
  opts.seed = cfg.seed;
  opts.kernel.n_grid = cfg.grid_n;
  opts.validate();
  return opts;
}

struct Slice {
  model::ObservedSeries series;
  model::CovariatePath cov;
};

Slice slice_range(const model::ObservedSeries& series, const model::CovariatePath& cov,
                  Date start, Date end) {
  const auto& dates = series.dates;
  const auto lo = std::lower_bound(dates.begin(), dates.end(), start);
  const auto hi = std::upper_bound(dates.begin(), dates.end(), end);
  if (lo == dates.end() || *lo != start || hi == dates.begin() || *(hi - 1) != end)
    raise(Errc::insufficient_data, "phase " + start.to_string() + ".." + end.to_string() +
                                       " is not covered by the data");
  const size_t a = static_cast<size_t>(lo - dates.begin());
  const size_t b = static_cast<size_t>(hi - dates.begin());
  Slice out;
  out.series.dates.assign(dates.begin() + a, dates.begin() + b);
  out.series.icu_census.assign(series.icu_census.begin() + a, series.icu_census.begin() + b);
  out.cov.dates = out.series.dates;
  out.cov.hospital_census.assign(cov.hospital_census.begin() + a,
                                 cov.hospital_census.begin() + b);
  out.cov.positivity.assign(cov.positivity.begin() + a, cov.positivity.begin() + b);
  return out;
}

std::vector<std::pair<Date, Date>> phases_or_whole(const RunConfig& cfg,
                                                   const model::ObservedSeries& series) {
  if (!cfg.phases.empty()) return cfg.phases;
  return {{series.dates.front(), series.dates.back()}};
}

void meta_section(io::ReportWriter& w, const RunConfig& cfg, const std::string& command) {
  w.section("meta");
  w.kv("command", command);
  if (!cfg.input_path.empty()) w.kv("input", cfg.input_path);
  w.kv("seed", static_cast<long>(cfg.seed));
  w.kv("grid_n", cfg.grid_n);
  w.kv("restarts", cfg.restarts);
}

void ingest_section(io::ReportWriter& w, const io::IngestReport& report) {
  w.section("ingest");
  w.kv("rows_read", report.rows_read);
  w.kv("rows_dropped", report.rows_dropped);
  w.kv("gap_days_filled", report.gap_days_filled);
  w.kv("positivity_source", report.positivity_source);
}

void estimates_section(io::ReportWriter& w, const inference::FitResult& fit, int phase) {
  w.section("estimates");
  if (phase > 0) w.kv("phase", phase);
  w.kv("model", fit.spec.name());
  const auto names = model::parameter_names(fit.spec);
  const auto values = model::pack_params(fit.spec, fit.mle);
  for (size_t i = 0; i < names.size(); ++i) w.kv(names[i], values[i]);
  w.kv("mean_icu_stay_days", model::mean_icu_stay(fit.mle));
  w.kv("loglik", fit.loglik);
  w.kv("aic", fit.aic);
  w.kv("converged", fit.converged);
  w.kv("restarts_agreeing", fit.restarts_agreeing);
}

void intervals_section(io::ReportWriter& w, const inference::FitResult& fit, int phase) {
  w.section("intervals");
  if (phase > 0) w.kv("phase", phase);
  const auto names = model::parameter_names(fit.spec);
  for (size_t i = 0; i < names.size(); ++i)
    w.kv(names[i], io::format_double(fit.intervals[i].first) + " " +
                       io::format_double(fit.intervals[i].second));
}

void aic_section(io::ReportWriter& w, const inference::SelectionOutcome& outcome, int phase) {
  w.section("aic");
  if (phase > 0) w.kv("phase", phase);
  w.kv("columns", "model k aic loglik converged");
  for (const auto& fit : outcome.ranked)
    w.row(fit.spec.name() + " " + std::to_string(fit.spec.parameter_count()) + " " +
          io::format_double(fit.aic) + " " + io::format_double(fit.loglik) + " " +
          (fit.converged ? "true" : "false"));
  for (const auto& [spec, reason] : outcome.excluded)
    w.kv("excluded", spec.name() + " " + reason);
}

std::vector<model::ModelSpec> candidate_list(const RunConfig& cfg) {
  if (cfg.models.empty()) return model::ModelSpec::all();
  std::vector<model::ModelSpec> out;
  for (const std::string& name : cfg.models) out.push_back(model::ModelSpec::from_name(name));
  return out;
}

// --- command bodies -------------------------------------------------------

void run_fit(const RunConfig& cfg, io::ReportWriter& w) {
  if (cfg.models.size() != 1)
    raise(Errc::bad_config, "fit needs exactly one --model");
  const io::Dataset data = io::ingest_csv(cfg.input_path);
  const model::ModelSpec spec = model::ModelSpec::from_name(cfg.models[0]);
  const auto opts = fit_options(cfg);

  meta_section(w, cfg, "fit");
  ingest_section(w, data.report);
  inference::FitResult fit = inference::fit_mle(data.series, data.cov, spec, opts);
  fit = inference::confidence_intervals(fit, data.series, data.cov, opts.kernel);
  estimates_section(w, fit, 0);
  intervals_section(w, fit, 0);
  inference::SelectionOutcome single;
  single.ranked.push_back(fit);
  aic_section(w, single, 0);
}

void run_select(const RunConfig& cfg, io::ReportWriter& w) {
  const io::Dataset data = io::ingest_csv(cfg.input_path);
  const auto candidates = candidate_list(cfg);
  const auto opts = fit_options(cfg);
  const auto phases = phases_or_whole(cfg, data.series);

  meta_section(w, cfg, "select");
  ingest_section(w, data.report);
  for (size_t ph = 0; ph < phases.size(); ++ph) {
    const Slice slice = slice_range(data.series, data.cov, phases[ph].first, phases[ph].second);
    const auto outcome = inference::select_model(slice.series, slice.cov, candidates, opts);
    const int phase_label = cfg.phases.empty() ? 0 : static_cast<int>(ph) + 1;
    aic_section(w, outcome, phase_label);
    if (!outcome.ranked.empty()) {
      inference::FitResult best = outcome.ranked.front();
      best = inference::confidence_intervals(best, slice.series, slice.cov, opts.kernel);
      estimates_section(w, best, phase_label);
      intervals_section(w, best, phase_label);
    }
  }
}

void run_simulate(const RunConfig& cfg) {
  const sim::DropLaw law = parse_drop_law(cfg.drops);
  Rng rng(cfg.seed, 0);
  const std::vector<int> h_total = sim::default_census_path(cfg.h0, cfg.t_max);
  sim::HospitalPanel panel = sim::disaggregate_hospitals(h_total, cfg.m, rng);
  panel.seed = cfg.seed;
  std::vector<int> h_col(cfg.t_max + 1);
  for (int j = 0; j < cfg.m; ++j) {
    for (int t = 0; t <= cfg.t_max; ++t) h_col[t] = panel.hospital_beds[t][j];
    const std::vector<int> icu = sim::gillespie_icu(h_col, cfg.alpha, cfg.mu, 1, cfg.t_max, rng);
    for (int t = 0; t <= cfg.t_max; ++t) panel.icu_beds[t][j] = icu[t];
  }
  const sim::AggregatedSeries agg = sim::apply_underreporting(panel, law, rng);

  model::ObservedSeries series;
  model::CovariatePath cov;
  const Date base = Date::from_ymd(2020, 1, 1);
  for (int t = 0; t <= cfg.t_max; ++t) {
    series.dates.push_back(base + t);
    cov.dates.push_back(base + t);
  }
  series.icu_census = agg.icu;
  cov.hospital_census = agg.hospital;
  cov.positivity.assign(cfg.t_max + 1, 0.0);
  io::emit_csv(cfg.out_path, series, cov);
}

void run_study(const RunConfig& cfg, io::ReportWriter& w) {
  sim::StudyConfig scfg;
  scfg.alpha_true = cfg.alpha;
  scfg.mu_true = cfg.mu;
  scfg.m = cfg.m;
  scfg.t_max = cfg.t_max;
  scfg.h0_total = cfg.h0;
  scfg.n_sim = cfg.nsim;
  scfg.drop_law = parse_drop_law(cfg.drops);
  scfg.seed = cfg.seed;
  const auto report = sim::run_study(scfg, fit_options(cfg));

  meta_section(w, cfg, "study");
  w.section("study");
  w.kv("n_sim", report.n_sim);
  w.kv("n_excluded", report.n_excluded);
  w.kv("drops", cfg.drops);
  auto parameter = [&](const char* name, const sim::ParameterSummary& s) {
    const std::string p(name);
    w.kv(p + "_truth", s.truth);
    w.kv(p + "_mean", s.mean);
    w.kv(p + "_bias", s.bias);
    w.kv(p + "_mean_relative_error", s.mean_relative_error);
    w.kv(p + "_coverage", s.coverage);
  };
  parameter("alpha", report.alpha);
  parameter("mu", report.mu);
  w.kv("mean_stay_days", report.mean_stay_days);

  w.section("study_replicates");
  w.kv("columns", "replicate alpha_hat mu_hat alpha_covered mu_covered");
  for (const auto& rep : report.replicates)
    w.row(std::to_string(rep.index) + " " + io::format_double(rep.alpha_hat) + " " +
          io::format_double(rep.mu_hat) + " " + (rep.alpha_covered ? "1" : "0") + " " +
          (rep.mu_covered ? "1" : "0"));
}

void run_validate(const RunConfig& cfg, io::ReportWriter& w) {
  const io::Dataset data = io::ingest_csv(cfg.input_path);
  const auto phases = phases_or_whole(cfg, data.series);
  if (cfg.models.size() != 1 && cfg.models.size() != phases.size())
    raise(Errc::bad_config, "validate needs one --model, or one per phase");
  const auto opts = fit_options(cfg);

  meta_section(w, cfg, "validate");
  ingest_section(w, data.report);
  for (size_t ph = 0; ph < phases.size(); ++ph) {
    const Slice slice = slice_range(data.series, data.cov, phases[ph].first, phases[ph].second);
    const model::ModelSpec spec =
        model::ModelSpec::from_name(cfg.models.size() == 1 ? cfg.models[0] : cfg.models[ph]);
    const int phase_label = cfg.phases.empty() ? 0 : static_cast<int>(ph) + 1;

    inference::FitResult fit = inference::fit_mle(slice.series, slice.cov, spec, opts);
    estimates_section(w, fit, phase_label);
    const assess::QuantileBand band = assess::replicate_band(
        fit, slice.cov, slice.series.icu_census.front(), cfg.nrep, cfg.seed + ph);

    int inside = 0;
    w.section("band");
    if (phase_label > 0) w.kv("phase", phase_label);
    w.kv("n_replicates", band.n_replicates);
    w.kv("columns", "date lower upper observed");
    for (size_t d = 0; d < band.dates.size(); ++d) {
      const int observed = slice.series.icu_census[d];
      if (band.lower[d] <= observed && observed <= band.upper[d]) ++inside;
      w.row(band.dates[d].to_string() + " " + std::to_string(band.lower[d]) + " " +
            std::to_string(band.upper[d]) + " " + std::to_string(observed));
    }
    w.kv("coverage", static_cast<double>(inside) / static_cast<double>(band.dates.size()));
  }
}

void run_forecast(const RunConfig& cfg, io::ReportWriter& w) {
  const io::Dataset data = io::ingest_csv(cfg.input_path);
  const auto phases = phases_or_whole(cfg, data.series);
  const auto opts = fit_options(cfg);

  meta_section(w, cfg, "forecast");
  ingest_section(w, data.report);

  assess::BacktestPlan plan;
  plan.phases = phases;
  plan.n_forecasts = cfg.nrep;

  // Per-phase models: given explicitly, broadcast from one, or chosen by AIC
  // on each phase's initial training window.
  std::vector<model::ModelSpec> specs;
  if (cfg.models.size() == phases.size()) {
    for (const std::string& name : cfg.models)
      specs.push_back(model::ModelSpec::from_name(name));
  } else if (cfg.models.size() == 1) {
    specs.assign(phases.size(), model::ModelSpec::from_name(cfg.models[0]));
  } else if (cfg.models.empty()) {
    for (const auto& [start, end] : phases) {
      const Date train_end = end - plan.holdout_weeks * plan.horizon_days;
      const Slice window = slice_range(data.series, data.cov, start, train_end);
      const auto outcome =
          inference::select_model(window.series, window.cov, model::ModelSpec::all(), opts);
      if (outcome.ranked.empty())
        raise(Errc::degenerate_data,
              "no candidate model fits the training window starting " + start.to_string());
      specs.push_back(outcome.ranked.front().spec);
    }
  } else {
    raise(Errc::bad_config, "forecast needs no --model, one, or one per phase");
  }

  const auto report =
      assess::rolling_forecast(data.series, data.cov, specs, plan, opts, cfg.seed);

  w.section("forecast");
  w.kv("coverage", report.coverage);
  for (const auto& [phase, reason] : report.skipped_phases)
    w.kv("skipped_phase", std::to_string(phase) + " " + reason);
  w.kv("columns", "phase week date lower upper observed");
  for (const auto& week : report.weeks) {
    w.kv("train_window", std::to_string(week.phase) + "." + std::to_string(week.week) + " " +
                             week.train_start.to_string() + " " + week.train_end.to_string());
    for (size_t d = 0; d < week.band.dates.size(); ++d) {
      const Date date = week.band.dates[d];
      const auto it = std::lower_bound(data.series.dates.begin(), data.series.dates.end(), date);
      const int observed =
          static_cast<int>(data.series.icu_census[it - data.series.dates.begin()]);
      w.row(std::to_string(week.phase) + " " + std::to_string(week.week) + " " +
            date.to_string() + " " + std::to_string(week.band.lower[d]) + " " +
            std::to_string(week.band.upper[d]) + " " + std::to_string(observed));
    }
  }
}

const char* command_name(Command c) {
  switch (c) {
    case Command::fit: return "fit";
    case Command::select: return "select";
    case Command::simulate: return "simulate";
    case Command::study: return "study";
    case Command::validate: return "validate";
    case Command::forecast: return "forecast";
  }
  return "?";
}

}  // namespace

std::vector<std::pair<Date, Date>> parse_phases(const std::string& text) {
  if (text == "paper")
    return {{Date::from_ymd(2020, 3, 29), Date::from_ymd(2020, 6, 15)},
            {Date::from_ymd(2020, 6, 16), Date::from_ymd(2020, 9, 1)},
            {Date::from_ymd(2020, 9, 2), Date::from_ymd(2020, 11, 15)}};
  std::vector<std::pair<Date, Date>> out;
  for (const std::string& range : split_list(text)) {
    const size_t colon = range.find(':');
    if (colon == std::string::npos)
      raise(Errc::bad_config, "phase range must be START:END, got '" + range + "'");
    Date start, end;
    try {
      start = Date::parse(range.substr(0, colon));
      end = Date::parse(range.substr(colon + 1));
    } catch (const Error& e) {
      raise(Errc::bad_config, std::string("bad phase range: ") + e.what());
    }
    out.emplace_back(start, end);
  }
  if (out.empty()) raise(Errc::bad_config, "empty phase list");
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i].second < out[i].first)
      raise(Errc::bad_config, "phase end precedes start");
    if (i > 0 && out[i].first <= out[i - 1].second)
      raise(Errc::bad_config, "phases must be ordered and non-overlapping");
  }
  return out;
}

ParseOutcome parse_command_line(const std::vector<std::string>& args) {
  RunConfig cfg;
  std::string models_text, phases_text;

  CLI::App app{"Covariate-driven immigration-death modeling of ICU occupancy"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--grid-n", cfg.grid_n, "transition grid size (power of two)");
    sub->add_option("--restarts", cfg.restarts, "optimizer restarts");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out_path, "output path");
  };
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input_path, "input CSV")->required();
  };
  auto add_models = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--model", models_text, "model id(s), comma separated");
    if (required) opt->required();
  };
  auto add_phases = [&](CLI::App* sub) {
    sub->add_option("--phases", phases_text, "'paper' or START:END[,START:END...]");
  };
  auto add_synthetic = [&](CLI::App* sub) {
    sub->add_option("--alpha", cfg.alpha, "true immigration coefficient");
    sub->add_option("--mu", cfg.mu, "true clearance rate");
    sub->add_option("--m", cfg.m, "number of hospitals");
    sub->add_option("--tmax", cfg.t_max, "days simulated");
    sub->add_option("--h0", cfg.h0, "total hospital beds occupied");
    sub->add_option("--drops", cfg.drops, "underreporting law: none or uniform_0_2");
  };

  CLI::App* fit = app.add_subcommand("fit", "maximum-likelihood fit of one model");
  add_input(fit);
  add_models(fit, true);
  add_common(fit);

  CLI::App* select = app.add_subcommand("select", "rank candidate models by AIC");
  add_input(select);
  add_models(select, false);
  add_phases(select);
  add_common(select);

  CLI::App* simulate = app.add_subcommand("simulate", "write one synthetic dataset as CSV");
  add_synthetic(simulate);
  add_common(simulate);

  CLI::App* study = app.add_subcommand("study", "bias/coverage study on synthetic panels");
  add_synthetic(study);
  study->add_option("--nsim", cfg.nsim, "number of replicates");
  add_common(study);

  CLI::App* validate = app.add_subcommand("validate", "replicate envelope around a fit");
  add_input(validate);
  add_models(validate, true);
  add_phases(validate);
  validate->add_option("--nrep", cfg.nrep, "replicate trajectories");
  add_common(validate);

  CLI::App* forecast = app.add_subcommand("forecast", "expanding-window weekly backtest");
  add_input(forecast);
  add_models(forecast, false);
  add_phases(forecast);
  forecast->add_option("--nrep", cfg.nrep, "forecast trajectories per week");
  add_common(forecast);

  ParseOutcome outcome;
  try {
    std::vector<std::string> mutable_args(args.rbegin(), args.rend());
    app.parse(mutable_args);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    outcome.exit_code = app.exit(e, out, err);
    outcome.message = out.str() + err.str();
    return outcome;
  }

  if (fit->parsed()) cfg.command = Command::fit;
  else if (select->parsed()) cfg.command = Command::select;
  else if (simulate->parsed()) cfg.command = Command::simulate;
  else if (study->parsed()) cfg.command = Command::study;
  else if (validate->parsed()) cfg.command = Command::validate;
  else cfg.command = Command::forecast;

  try {
    if (!models_text.empty()) cfg.models = split_list(models_text);
    for (const std::string& name : cfg.models) model::ModelSpec::from_name(name);
    if (!phases_text.empty()) cfg.phases = parse_phases(phases_text);
  } catch (const Error& e) {
    outcome.exit_code = 2;
    outcome.message = std::string(e.what()) + "\n";
    return outcome;
  }

  outcome.config = cfg;
  return outcome;
}

int run(const RunConfig& cfg) {
  io::ReportWriter writer(cfg.out_path);
  try {
    switch (cfg.command) {
      case Command::fit: run_fit(cfg, writer); break;
      case Command::select: run_select(cfg, writer); break;
      case Command::simulate: run_simulate(cfg); return 0;
      case Command::study: run_study(cfg, writer); break;
      case Command::validate: run_validate(cfg, writer); break;
      case Command::forecast: run_forecast(cfg, writer); break;
    }
    writer.commit();
    return 0;
  } catch (const std::exception& e) {
    const Error* known = dynamic_cast<const Error*>(&e);
    std::cerr << "[error]\n"
              << "command = " << command_name(cfg.command) << "\n"
              << "code = " << (known ? to_string(known->code()) : "internal") << "\n"
              << "message = " << e.what() << "\n";
    if (!writer.text().empty()) {
      try {
        std::cerr << "partial_report = " << writer.quarantine() << "\n";
      } catch (...) {
      }
    }
    return 1;
  }
}

}  // namespace idp::cli
