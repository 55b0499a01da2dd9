#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace kara {

using json = nlohmann::json;

/// Base class of every engine error. Each subclass maps to exactly one
/// machine-readable code, which the CLI and HTTP layer forward verbatim.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message, json details = json::object())
      : std::runtime_error(message), code_(std::move(code)), details_(std::move(details)) {}

  const std::string& code() const noexcept { return code_; }
  const json& details() const noexcept { return details_; }

  json to_json() const {
    return json{{"code", code_}, {"message", what()}, {"details", details_}};
  }

private:
  std::string code_;
  json details_;
};

class InvalidArgument : public Error {
public:
  explicit InvalidArgument(const std::string& msg, json details = json::object())
      : Error("invalid_argument", msg, std::move(details)) {}
};

class NotFound : public Error {
public:
  explicit NotFound(const std::string& msg, json details = json::object())
      : Error("not_found", msg, std::move(details)) {}
};

class ContradictionError : public Error {
public:
  ContradictionError(const std::string& msg, json details)
      : Error("contradiction", msg, std::move(details)) {}
};

class LayoutMismatch : public Error {
public:
  explicit LayoutMismatch(const std::string& msg, json details = json::object())
      : Error("layout_mismatch", msg, std::move(details)) {}
};

class MalformedProblem : public Error {
public:
  explicit MalformedProblem(const std::string& msg, json details = json::object())
      : Error("malformed_problem", msg, std::move(details)) {}
};

class InfeasibleComparisonChain : public Error {
public:
  InfeasibleComparisonChain(const std::string& msg, json details)
      : Error("infeasible_chain", msg, std::move(details)) {}
};

class SizeLimitExceeded : public Error {
public:
  explicit SizeLimitExceeded(const std::string& msg, json details = json::object())
      : Error("size_limit_exceeded", msg, std::move(details)) {}
};

class Cancelled : public Error {
public:
  explicit Cancelled(const std::string& msg) : Error("cancelled", msg) {}
};

class VersionConflict : public Error {
public:
  VersionConflict(const std::string& msg, json details)
      : Error("version_conflict", msg, std::move(details)) {}
};

class ValidationFailed : public Error {
public:
  explicit ValidationFailed(const std::string& msg, json details = json::object())
      : Error("validation_failed", msg, std::move(details)) {}
};

class ImmutableRecord : public Error {
public:
  explicit ImmutableRecord(const std::string& msg, json details = json::object())
      : Error("immutable_record", msg, std::move(details)) {}
};

class PosRejected : public Error {
public:
  PosRejected(const std::string& msg, json details)
      : Error("pos_out_of_region", msg, std::move(details)) {}
};

class AlreadyExists : public Error {
public:
  explicit AlreadyExists(const std::string& msg, json details = json::object())
      : Error("already_exists", msg, std::move(details)) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& msg, json details) : Error("parse_error", msg, std::move(details)) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& msg, json details = json::object())
      : Error("io_error", msg, std::move(details)) {}
};

}  // namespace kara
