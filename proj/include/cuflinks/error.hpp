#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cuflinks {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure. Always names the offending path.
class IoError : public Error {
 public:
  IoError(std::filesystem::path path, const std::string& what)
      : Error(path.string() + ": " + what), path_(std::move(path)) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed text in a tag file, ledger, dictionary, or log.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class NotABagError : public Error {
 public:
  using Error::Error;
};

/// A bag violates a structural invariant (path rules, missing manifest, ...).
class BagStructureError : public Error {
 public:
  using Error::Error;
};

/// A bag failed the validation level an operation requires.
class BagInvalidError : public Error {
 public:
  using Error::Error;
};

class MalformedArchiveError : public Error {
 public:
  using Error::Error;
};

class TransferError : public Error {
 public:
  TransferError(const std::string& what, bool transient = true)
      : Error(what), transient_(transient) {}
  /// Transient failures are retried; permanent ones (4xx, bad URL) are not.
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class IdentifierSyntaxError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// An RO aggregate or annotation points at a path that is not in the bag.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class CycleError : public Error {
 public:
  CycleError(const std::string& what, std::vector<std::string> members)
      : Error(what), members_(std::move(members)) {}
  const std::vector<std::string>& members() const noexcept { return members_; }

 private:
  std::vector<std::string> members_;
};

/// Operation rejected because of the current state (duplicate, tombstoned, ...).
class ConflictError : public Error {
 public:
  using Error::Error;
};

class LockedError : public Error {
 public:
  using Error::Error;
};

}  // namespace cuflinks
