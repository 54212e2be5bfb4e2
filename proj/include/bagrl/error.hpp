#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bagrl {

enum class ErrorCode {
  invalid_input,
  invalid_params,
  invalid_config,
  unclassifiable_observation,
  no_affordance,
  contract_violation,
  must_reset,
  incomplete_policy,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_params: return "invalid-params";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::unclassifiable_observation: return "unclassifiable-observation";
    case ErrorCode::no_affordance: return "no-affordance";
    case ErrorCode::contract_violation: return "contract-violation";
    case ErrorCode::must_reset: return "must-reset";
    case ErrorCode::incomplete_policy: return "incomplete-policy";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when an observation satisfies none of the state predicates.
class UnclassifiableObservation : public Error {
 public:
  UnclassifiableObservation(double a_bag, double a_o, double a_cube)
      : Error(ErrorCode::unclassifiable_observation,
              "a_bag=" + std::to_string(a_bag) + " a_o=" + std::to_string(a_o) +
                  " a_cube=" + std::to_string(a_cube)),
        a_bag(a_bag),
        a_o(a_o),
        a_cube(a_cube) {}

  double a_bag;
  double a_o;
  double a_cube;
};

}  // namespace bagrl
