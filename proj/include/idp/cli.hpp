#ifndef IDP_CLI_HPP
#define IDP_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idp/dates.hpp"

namespace idp::cli {

enum class Command { fit, select, simulate, study, validate, forecast };

struct RunConfig {
  Command command = Command::fit;
  std::string input_path;
  std::string out_path = "idp_report.txt";
  std::vector<std::string> models;  // one for fit/validate, a list for select/forecast
  std::vector<std::pair<Date, Date>> phases;  // empty = whole observed range
  int grid_n = 2048;
  int restarts = 10;
  std::uint64_t seed = 0;
  int nsim = 1000;
  std::string drops = "none";
  int nrep = 100;
  // synthetic-data knobs (simulate/study)
  double alpha = 0.1;
  double mu = 0.2;
  int m = 25;
  int t_max = 200;
  int h0 = 43;
};

struct ParseOutcome {
  std::optional<RunConfig> config;  // set when the command should run
  int exit_code = 0;
  std::string message;  // help text or parse error
};

// argv without the program name.
ParseOutcome parse_command_line(const std::vector<std::string>& args);

// "paper" for the three 2020 Orange County phases, or a comma-separated
// list of inclusive START:END ISO date ranges.
std::vector<std::pair<Date, Date>> parse_phases(const std::string& text);

// Dispatches the command, writes the report/dataset artifacts, and returns
// the process exit status. Failures leave a machine-readable [error] record
// on stderr and park any partial report in a quarantine subdirectory.
int run(const RunConfig& cfg);

}  // namespace idp::cli

#endif
