#pragma once

#include <stdexcept>
#include <string>

namespace graphem {

/// Base class for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Matrix/vector dimensions do not match the operation's contract.
struct shape_error : error {
  using error::error;
};

/// A scalar argument is outside its mathematical domain (e.g. sigma2 <= 0).
struct domain_error : error {
  using error::error;
};

/// The data support has zero volume; no background density can be defined.
struct degenerate_support_error : error {
  using error::error;
};

/// Invalid configuration (bad hyperparameter, empty input, bad option combo).
struct config_error : error {
  using error::error;
};

/// A computation produced a non-finite or otherwise unusable result.
struct numerical_error : error {
  using error::error;
};

/// The centroid linear system stayed singular/indefinite after jitter retries.
struct solver_error : numerical_error {
  using numerical_error::numerical_error;
};

/// File parsing or writing failure.
struct io_error : error {
  using error::error;
};

}  // namespace graphem
