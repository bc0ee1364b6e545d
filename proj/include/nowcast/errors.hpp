#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

// Error taxonomy mapped to CLI exit codes:
//   ArgumentError/ConfigError -> 1, FormatError/DataError/StorageError -> 2,
//   NumericError -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& msg) : Error("argument: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error("format: " + msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data: " + msg) {}
};

struct StorageError : Error {
    explicit StorageError(const std::string& msg) : Error("storage: " + msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric: " + msg) {}
};

}  // namespace nowcast
