#ifndef IDP_ERRORS_HPP
#define IDP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace idp {

// Failure categories raised by the library. The CLI prints the kebab-case
// name of the code in its error records.
enum class Errc {
  invalid_input,
  invalid_covariate,
  degenerate_rate,
  degenerate_data,
  aliasing_risk,
  state_overflow,
  non_convergence,
  singular_information,
  non_psd,
  insufficient_data,
  infeasible_decrement,
  invalid_law,
  malformed_row,
  positivity_out_of_range,
  icu_gap,
  io_error,
  bad_config,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& msg);

}  // namespace idp

#endif
