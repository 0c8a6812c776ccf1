#include "idp/errors.hpp"

namespace idp {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "invalid-input";
    case Errc::invalid_covariate: return "invalid-covariate";
    case Errc::degenerate_rate: return "degenerate-rate";
    case Errc::degenerate_data: return "degenerate-data";
    case Errc::aliasing_risk: return "aliasing-risk";
    case Errc::state_overflow: return "state-overflow";
    case Errc::non_convergence: return "non-convergence";
    case Errc::singular_information: return "singular-information";
    case Errc::non_psd: return "non-psd";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::infeasible_decrement: return "infeasible-decrement";
    case Errc::invalid_law: return "invalid-law";
    case Errc::malformed_row: return "malformed-row";
    case Errc::positivity_out_of_range: return "positivity-out-of-range";
    case Errc::icu_gap: return "icu-gap";
    case Errc::io_error: return "io-error";
    case Errc::bad_config: return "bad-config";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& msg)
    : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace idp
