// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icluq {

enum class ErrorCode {
  // numeric core
  NotADistribution,
  AllZeroMass,
  DegenerateGrid,
  ShapeMismatch,
  // answer extraction
  Unparseable,
  EmptySequence,
  MissingAlternatives,
  // datasets / prompting
  MalformedRecord,
  UnknownLabel,
  NotEnoughInstances,
  ClassUnderrepresented,
  // gateway
  EndpointUnreachable,
  LogprobsUnsupported,
  TruncatedResponse,
  StorageFailure,
  TraceMiss,
  SchemaVersionMismatch,
  // metrics / protocols
  SingleClass,
  NoPositives,
  AllLabelsMasked,
  // misc
  InvalidArgument,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotADistribution: return "NotADistribution";
    case ErrorCode::AllZeroMass: return "AllZeroMass";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::MissingAlternatives: return "MissingAlternatives";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::NotEnoughInstances: return "NotEnoughInstances";
    case ErrorCode::ClassUnderrepresented: return "ClassUnderrepresented";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::LogprobsUnsupported: return "LogprobsUnsupported";
    case ErrorCode::TruncatedResponse: return "TruncatedResponse";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::TraceMiss: return "TraceMiss";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::AllLabelsMasked: return "AllLabelsMasked";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Library-wide exception carrying a stable error code for callers that
/// dispatch on failure kind rather than message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace icluq

#define ICLUQ_REQUIRE(cond, code, msg)      \
  do {                                      \
    if (!(cond)) ::icluq::raise(code, msg); \
  } while (0)
