#pragma once

#include <stdexcept>
#include <string>

namespace hemlets {

enum class ErrorCode {
  invalid_joint,
  degenerate_part,
  dimension,
  config,
  unknown_polarity,
  invalid_input,
  scaling_undefined,
  empty_evaluation,
  alignment_degenerate,
  invalid_rig,
  not_ready,
  training_diverged,
  rank,
  parse,
  io,
  geometry,
};

const char* to_string(ErrorCode code);

// Every library failure is reported through this one type; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_joint: return "invalid joint";
    case ErrorCode::degenerate_part: return "degenerate part";
    case ErrorCode::dimension: return "dimension mismatch";
    case ErrorCode::config: return "config error";
    case ErrorCode::unknown_polarity: return "unknown polarity";
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::scaling_undefined: return "scaling undefined";
    case ErrorCode::empty_evaluation: return "empty evaluation";
    case ErrorCode::alignment_degenerate: return "alignment degenerate";
    case ErrorCode::invalid_rig: return "invalid rig";
    case ErrorCode::not_ready: return "not ready";
    case ErrorCode::training_diverged: return "training diverged";
    case ErrorCode::rank: return "rank error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::geometry: return "geometry error";
  }
  return "error";
}

}  // namespace hemlets
