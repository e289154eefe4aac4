#pragma once

#include <stdexcept>
#include <string>

namespace otrank {

// Base of every error raised by the library. The category maps onto the CLI
// exit codes (data errors -> 3, internal consistency -> 4, usage -> 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched counts or dimensions between inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, out-of-range parameters, invalid grids.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (CSV, table files).
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// A cached null table does not describe the requested test.
class MetadataError : public DataError {
 public:
  using DataError::DataError;
};

// A fixed-size resource (prime table, brute-force guard) is exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A provably impossible state, e.g. a clearly negative energy statistic.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace otrank
