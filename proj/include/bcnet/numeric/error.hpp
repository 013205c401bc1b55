#pragma once

#include <stdexcept>
#include <string>

namespace bcnet {

// Base of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or inner-dimension mismatch between operands.
class dimension_error : public error {
 public:
  using error::error;
};

// A precondition on arguments was violated.
class contract_error : public error {
 public:
  using error::error;
};

// NaN or Inf appeared in a forward value or a loss.
class numeric_error : public error {
 public:
  using error::error;
};

// Malformed input data (features, annotations, proposals, checkpoints).
class data_error : public error {
 public:
  using error::error;
};

class parse_error : public data_error {
 public:
  using data_error::data_error;
};

class manifest_error : public data_error {
 public:
  using data_error::data_error;
};

class config_error : public error {
 public:
  using error::error;
};

}  // namespace bcnet
