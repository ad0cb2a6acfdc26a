#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fdc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violations on caller-supplied configuration (counts, ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class DataErrc {
  MissingFile,
  EmptyBody,
  RaggedRow,
  MalformedQuote,
  DuplicateName,
  MissingValue,
  NonFiniteValue,
  NonNumericTarget,
  UnknownColumn,
  KindOverride,
  UnseenLevel,
  SchemaMismatch,
  InvalidDataset,
};

inline const char* to_string(DataErrc code) {
  switch (code) {
    case DataErrc::MissingFile: return "missing file";
    case DataErrc::EmptyBody: return "empty body";
    case DataErrc::RaggedRow: return "ragged row";
    case DataErrc::MalformedQuote: return "malformed quote";
    case DataErrc::DuplicateName: return "duplicate column name";
    case DataErrc::MissingValue: return "missing value";
    case DataErrc::NonFiniteValue: return "non-finite value";
    case DataErrc::NonNumericTarget: return "non-numeric target";
    case DataErrc::UnknownColumn: return "unknown column";
    case DataErrc::KindOverride: return "invalid kind override";
    case DataErrc::UnseenLevel: return "unseen categorical level";
    case DataErrc::SchemaMismatch: return "schema mismatch";
    case DataErrc::InvalidDataset: return "invalid dataset";
  }
  return "data error";
}

class DataError : public Error {
 public:
  DataError(DataErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  DataErrc code() const noexcept { return code_; }

 private:
  DataErrc code_;
};

enum class PredictErrc {
  SchemaMismatch,
  UnknownLevel,
  Evaluation,
  NonFinite,
  Transport,
  HttpStatus,
  MalformedResponse,
  LengthMismatch,
};

inline const char* to_string(PredictErrc code) {
  switch (code) {
    case PredictErrc::SchemaMismatch: return "schema mismatch";
    case PredictErrc::UnknownLevel: return "unknown level";
    case PredictErrc::Evaluation: return "evaluation error";
    case PredictErrc::NonFinite: return "non-finite prediction";
    case PredictErrc::Transport: return "transport failure";
    case PredictErrc::HttpStatus: return "http status";
    case PredictErrc::MalformedResponse: return "malformed response";
    case PredictErrc::LengthMismatch: return "length mismatch";
  }
  return "predict error";
}

class PredictError : public Error {
 public:
  PredictError(PredictErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  PredictErrc code() const noexcept { return code_; }

 private:
  PredictErrc code_;
};

enum class ParseErrc { Syntax, UnknownFeature, UnknownFunction, UnknownLevel, CategoricalArithmetic, NotCategorical };

inline const char* to_string(ParseErrc code) {
  switch (code) {
    case ParseErrc::Syntax: return "syntax error";
    case ParseErrc::UnknownFeature: return "unknown feature";
    case ParseErrc::UnknownFunction: return "unknown function";
    case ParseErrc::UnknownLevel: return "unknown level";
    case ParseErrc::CategoricalArithmetic: return "categorical feature used arithmetically";
    case ParseErrc::NotCategorical: return "equality test on non-categorical feature";
  }
  return "parse error";
}

/// Expression parse failure; `offset` is the byte position in the source.
class ParseError : public Error {
 public:
  ParseError(ParseErrc code, std::size_t offset, const std::string& detail)
      : Error(std::string(to_string(code)) + " at offset " + std::to_string(offset) + ": " + detail),
        code_(code),
        offset_(offset) {}
  ParseErrc code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrc code_;
  std::size_t offset_;
};

enum class ModelErrc { RankDeficient, MalformedJson, InvariantViolation, Training };

inline const char* to_string(ModelErrc code) {
  switch (code) {
    case ModelErrc::RankDeficient: return "rank deficient design";
    case ModelErrc::MalformedJson: return "malformed model json";
    case ModelErrc::InvariantViolation: return "model invariant violated";
    case ModelErrc::Training: return "training failed";
  }
  return "model error";
}

class ModelError : public Error {
 public:
  ModelError(ModelErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  ModelErrc code() const noexcept { return code_; }

 private:
  ModelErrc code_;
};

/// An AleModel was paired with a dataset or predictor it was not built from.
class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

/// Training failure inside cross-validation, tagged with the fold index.
class FoldError : public Error {
 public:
  FoldError(std::size_t fold, const std::string& detail)
      : Error("fold " + std::to_string(fold) + ": " + detail), fold_(fold) {}
  std::size_t fold() const noexcept { return fold_; }

 private:
  std::size_t fold_;
};

}  // namespace fdc
