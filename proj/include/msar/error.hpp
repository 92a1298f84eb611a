#pragma once

#include <stdexcept>
#include <string>

namespace msar {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A malformed input file (visits, mapping table, rule table, weights).
class ParseError : public Error {
public:
  using Error::Error;
};

/// An input path that does not exist or cannot be opened.
class InputNotFoundError : public Error {
public:
  explicit InputNotFoundError(std::string path)
      : Error("input file not found: " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// Out-of-range configuration value.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// z-normalization over a rule table whose statistic has zero spread.
class DegenerateNormalizationError : public Error {
public:
  explicit DegenerateNormalizationError(std::string statistic)
      : Error("degenerate normalization: " + statistic +
              " has zero standard deviation across the rule table"),
        statistic_(std::move(statistic)) {}

  const std::string& statistic() const noexcept { return statistic_; }

private:
  std::string statistic_;
};

/// Weight solving on a similarity graph without edges.
class NoEdgesError : public Error {
public:
  NoEdgesError() : Error("similarity graph has no edges; weights are undefined") {}
};

/// Operation called on an empty input where a non-empty one is required.
class EmptyInputError : public Error {
public:
  using Error::Error;
};

}  // namespace msar
