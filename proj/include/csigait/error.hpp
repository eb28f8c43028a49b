#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csigait {

// Base for every error raised by the library. `DataError` and subclasses map to
// CLI exit code 2; `UsageError` maps to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

// Invalid numeric argument or precondition violation.
class ParameterError : public DataError {
public:
  using DataError::DataError;
};

class ConfigError : public DataError {
public:
  using DataError::DataError;
};

class ShapeError : public DataError {
public:
  using DataError::DataError;
};

// Bad magic or unsupported version.
class FormatError : public DataError {
public:
  using DataError::DataError;
};

// A record runs past the end of the stream.
class TruncationError : public DataError {
public:
  TruncationError(std::size_t offset, const std::string& what)
      : DataError("truncated record at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

// Record decoded but its contents violate the packet invariants.
class CorruptRecordError : public DataError {
public:
  CorruptRecordError(std::size_t record, std::size_t offset, const std::string& what)
      : DataError("corrupt record #" + std::to_string(record) + " at byte " +
                  std::to_string(offset) + ": " + what),
        record_(record),
        offset_(offset) {}
  std::size_t record_index() const noexcept { return record_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t record_;
  std::size_t offset_;
};

class EncodeError : public DataError {
public:
  EncodeError(std::size_t packet, const std::string& field, const std::string& what)
      : DataError("cannot encode packet #" + std::to_string(packet) + " field '" + field +
                  "': " + what),
        packet_(packet),
        field_(field) {}
  std::size_t packet_index() const noexcept { return packet_; }
  const std::string& field() const noexcept { return field_; }

private:
  std::size_t packet_;
  std::string field_;
};

}  // namespace csigait
