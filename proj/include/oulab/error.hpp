#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oulab {

enum class Errc {
  invalid_argument,
  not_psd,
  not_hurwitz,
  overflow,
  no_convergence,
  model_error,
  blow_up,
  degenerate,
  config_error,
  io_error,
};

constexpr std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::not_psd: return "not-psd";
    case Errc::not_hurwitz: return "invalid-system";
    case Errc::overflow: return "overflow";
    case Errc::no_convergence: return "no-convergence";
    case Errc::model_error: return "model-error";
    case Errc::blow_up: return "blow-up";
    case Errc::degenerate: return "degenerate";
    case Errc::config_error: return "config-error";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Power iteration gave up; carries the last singular value estimate.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double last_estimate)
      : Error(Errc::no_convergence, what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

}  // namespace oulab
