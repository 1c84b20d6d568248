#pragma once

#include <stdexcept>
#include <string>

namespace sbl {

enum class ErrorCode {
  DuplicateName,
  MidTickMutation,
  TypeMismatch,
  UnknownPort,
  BehaviorPanic,
  LagBeyondHorizon,
  DimensionMismatch,
  NoPairedPredictive,
  NoGoalSchemaForEffect,
  DuplicatePair,
  NoFreeModulatoryChannel,
  ConfigError,
  ScenarioFailure,
  Timeout,
  MissingArtifact,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::MidTickMutation: return "MidTickMutation";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::UnknownPort: return "UnknownPort";
    case ErrorCode::BehaviorPanic: return "BehaviorPanic";
    case ErrorCode::LagBeyondHorizon: return "LagBeyondHorizon";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoPairedPredictive: return "NoPairedPredictive";
    case ErrorCode::NoGoalSchemaForEffect: return "NoGoalSchemaForEffect";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::NoFreeModulatoryChannel: return "NoFreeModulatoryChannel";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ScenarioFailure: return "ScenarioFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

class SblError : public std::runtime_error {
 public:
  SblError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw SblError(code, what);
}

}  // namespace sbl
