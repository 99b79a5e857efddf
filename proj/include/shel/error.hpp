#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace shel {

// Error categories. They map onto the CLI / C API status codes:
// config = 2, data = 3, numeric = 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// -- data / validation ------------------------------------------------------

struct ParseError : DataError {
  ParseError(const std::string& path, long line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what),
        line_number(line) {}
  long line_number;
};
struct ValidationError : DataError {
  using DataError::DataError;
};
struct DimensionMismatch : DataError {
  using DataError::DataError;
};
struct DuplicateCoordinates : DataError {
  using DataError::DataError;
};
struct IsolatedNode : DataError {
  explicit IsolatedNode(int node)
      : DataError("graph has an isolated (degree-0) node: " + std::to_string(node)),
        node_index(node) {}
  int node_index;
};
struct DisconnectedGraph : DataError {
  using DataError::DataError;
};
struct RankDeficientDesign : DataError {
  using DataError::DataError;
};
struct NonPositiveParams : DataError {
  using DataError::DataError;
};

// -- config -----------------------------------------------------------------

struct NoIntercept : ConfigError {
  using ConfigError::ConfigError;
};
struct EmptyRoster : ConfigError {
  using ConfigError::ConfigError;
};

// -- numeric ----------------------------------------------------------------

struct NonFiniteResidual : NumericError {
  using NumericError::NumericError;
};
struct NonPositiveDenominator : NumericError {
  using NumericError::NumericError;
};
struct OverflowError : NumericError {
  using NumericError::NumericError;
};
struct PDCheckFailed : NumericError {
  using NumericError::NumericError;
};
struct ChainDiverged : NumericError {
  using NumericError::NumericError;
};
struct EmptyChain : NumericError {
  using NumericError::NumericError;
};
struct FoldFailed : NumericError {
  using NumericError::NumericError;
};
struct InfeasibleReference : NumericError {
  using NumericError::NumericError;
};

// Carries the WLS fallback so callers can report where the search was centered.
struct NoFeasibleStart : NumericError {
  explicit NoFeasibleStart(Eigen::VectorXd wls, const std::string& what)
      : NumericError(what), wls_beta(std::move(wls)) {}
  Eigen::VectorXd wls_beta;
};

}  // namespace shel
