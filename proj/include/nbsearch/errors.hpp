#pragma once

#include <stdexcept>
#include <string>

namespace nbsearch {

/// Base of every error raised by the library. Callers that only need to
/// report a failure can catch this; callers that recover catch the subtype.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NBSEARCH_DEFINE_ERROR(Name)      \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// notebook_ingest
NBSEARCH_DEFINE_ERROR(MalformedNotebook);
NBSEARCH_DEFINE_ERROR(RootNotFound);

// chunker
NBSEARCH_DEFINE_ERROR(SummarizerUnavailable);

// model_gateway
NBSEARCH_DEFINE_ERROR(EmptyInput);
NBSEARCH_DEFINE_ERROR(DimensionDrift);
NBSEARCH_DEFINE_ERROR(NoTokens);
NBSEARCH_DEFINE_ERROR(OverCompletionBudget);

// vector_store
NBSEARCH_DEFINE_ERROR(DimensionMismatch);
NBSEARCH_DEFINE_ERROR(DuplicateKeyInBatch);
NBSEARCH_DEFINE_ERROR(CorruptIndex);

// query_eval
NBSEARCH_DEFINE_ERROR(EmptyStore);
NBSEARCH_DEFINE_ERROR(UnknownTarget);

// cli_sync
NBSEARCH_DEFINE_ERROR(ConfigError);
NBSEARCH_DEFINE_ERROR(IndexLocked);

#undef NBSEARCH_DEFINE_ERROR

/// Raised by extract_units when a cell is not parseable Python.
class SyntaxErrorInCell : public Error {
 public:
  SyntaxErrorInCell(const std::string& message, int line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Provider request failed after the retry policy gave up. status is the last
/// HTTP status seen, or 0 when no response was received at all.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, int status)
      : Error(message + " (status " + std::to_string(status) + ")"), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace nbsearch
