#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace probeopt {

enum class ErrorCode {
  NonIncreasingRewards,
  RewardOutOfRange,
  ProbsNotNormalized,
  CertainTopState,
  NegativeCost,
  BadShape,
  LevelOutOfRange,
  UnknownChannel,
  RepeatedProbe,
  InvalidPolicy,
  WrongK,
  UnequalCosts,
  EpsilonOutOfRange,
  BudgetExceeded,
  TooLarge,
  InconsistentOptions,
  InfeasibleRate,
  RateOutOfRange,
  DegenerateBound,
  Parse,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonIncreasingRewards: return "NonIncreasingRewards";
    case ErrorCode::RewardOutOfRange: return "RewardOutOfRange";
    case ErrorCode::ProbsNotNormalized: return "ProbsNotNormalized";
    case ErrorCode::CertainTopState: return "CertainTopState";
    case ErrorCode::NegativeCost: return "NegativeCost";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::RepeatedProbe: return "RepeatedProbe";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::WrongK: return "WrongK";
    case ErrorCode::UnequalCosts: return "UnequalCosts";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InconsistentOptions: return "InconsistentOptions";
    case ErrorCode::InfeasibleRate: return "InfeasibleRate";
    case ErrorCode::RateOutOfRange: return "RateOutOfRange";
    case ErrorCode::DegenerateBound: return "DegenerateBound";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// A single diagnostic attached to an Error.
struct Issue {
  ErrorCode code;
  std::string message;
};

// Thrown by every operation in the library. Validation collects all violated
// invariants into `issues`; other failures carry exactly one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        issues_{{code, message}} {}

  explicit Error(std::vector<Issue> issues)
      : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

  ErrorCode code() const { return issues_.front().code; }
  const std::vector<Issue>& issues() const { return issues_; }

  bool has(ErrorCode code) const {
    for (const auto& issue : issues_) {
      if (issue.code == code) return true;
    }
    return false;
  }

 private:
  static std::string summarize(const std::vector<Issue>& issues) {
    std::string out;
    for (const auto& issue : issues) {
      if (!out.empty()) out += "; ";
      out += std::string(to_string(issue.code)) + ": " + issue.message;
    }
    return out;
  }

  std::vector<Issue> issues_;
};

}  // namespace probeopt
