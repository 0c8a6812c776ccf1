#include <iostream>
#include <vector>

#include "idp/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  const idp::cli::ParseOutcome outcome = idp::cli::parse_command_line(args);
  if (!outcome.config) {
    (outcome.exit_code == 0 ? std::cout : std::cerr) << outcome.message;
    return outcome.exit_code;
  }
  return idp::cli::run(*outcome.config);
}
