#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbm {

enum class ErrorCode {
  MissingChannel,
  NonUniformSampling,
  NonFiniteValue,
  EmptyFile,
  ParseError,
  IoError,
  OutOfRange,
  ZeroVariance,
  UnknownChannel,
  CutoffAboveNyquist,
  InvalidSpec,
  SignalTooShort,
  RankDeficient,
  DimensionMismatch,
  TooShort,
  InsufficientHistory,
  NotPSD,
  NonFiniteInput,
  DivergenceDetected,
  LengthMismatch,
  InsufficientData,
  TooFewModels,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NonFiniteValueError : public Error {
 public:
  NonFiniteValueError(std::size_t row, std::string channel)
      : Error(ErrorCode::NonFiniteValue,
              "row " + std::to_string(row) + ", channel '" + channel + "'"),
        row_(row),
        channel_(std::move(channel)) {}

  /// 1-based data row (the header is not counted).
  std::size_t row() const noexcept { return row_; }
  const std::string& channel() const noexcept { return channel_; }

 private:
  std::size_t row_;
  std::string channel_;
};

}  // namespace sbm
