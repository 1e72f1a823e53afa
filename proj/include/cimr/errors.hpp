#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cimr {

enum class DomainErrc {
  OutOfBounds,
  CellFull,
  NoSuchObject,
  AnswerKindMismatch,
  MalformedObservation,
  EmptyFusionInput,
  DimMismatch,
  BadCalibration,
  InvalidScene,
};

enum class BackendErrc { Unreachable, BadReply };

enum class ConfigErrc { UnknownKey, BadVariant, BadCalibration, NoEpisodes, BadValue, Missing };

enum class IoErrc { BadTrace, Write, Read };

constexpr std::string_view to_string(DomainErrc c) {
  switch (c) {
    case DomainErrc::OutOfBounds: return "OutOfBounds";
    case DomainErrc::CellFull: return "CellFull";
    case DomainErrc::NoSuchObject: return "NoSuchObject";
    case DomainErrc::AnswerKindMismatch: return "AnswerKindMismatch";
    case DomainErrc::MalformedObservation: return "MalformedObservation";
    case DomainErrc::EmptyFusionInput: return "EmptyFusionInput";
    case DomainErrc::DimMismatch: return "DimMismatch";
    case DomainErrc::BadCalibration: return "BadCalibration";
    case DomainErrc::InvalidScene: return "InvalidScene";
  }
  return "?";
}

constexpr std::string_view to_string(BackendErrc c) {
  return c == BackendErrc::Unreachable ? "Unreachable" : "BadReply";
}

constexpr std::string_view to_string(ConfigErrc c) {
  switch (c) {
    case ConfigErrc::UnknownKey: return "UnknownKey";
    case ConfigErrc::BadVariant: return "BadVariant";
    case ConfigErrc::BadCalibration: return "BadCalibration";
    case ConfigErrc::NoEpisodes: return "NoEpisodes";
    case ConfigErrc::BadValue: return "BadValue";
    case ConfigErrc::Missing: return "Missing";
  }
  return "?";
}

constexpr std::string_view to_string(IoErrc c) {
  switch (c) {
    case IoErrc::BadTrace: return "BadTrace";
    case IoErrc::Write: return "Write";
    case IoErrc::Read: return "Read";
  }
  return "?";
}

// Exception carrying a typed error code alongside the message.
template <typename Code>
class CodedError : public std::runtime_error {
 public:
  CodedError(Code code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

using DomainError = CodedError<DomainErrc>;
using BackendError = CodedError<BackendErrc>;
using ConfigError = CodedError<ConfigErrc>;
using IoError = CodedError<IoErrc>;

}  // namespace cimr
