#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geigerlab {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `offset` is the byte offset of the offending field.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Config or data fails validation; `path` names the field (e.g. "scenario.duration_s").
class ConfigError : public Error {
public:
  ConfigError(const std::string &path, const std::string &what)
      : Error(path + ": " + what), path_(path) {}
  const std::string &path() const noexcept { return path_; }

private:
  std::string path_;
};

/// Nonlinear fit did not converge; message carries the diagnostics.
class FitError : public Error {
public:
  using Error::Error;
};

} // namespace geigerlab
