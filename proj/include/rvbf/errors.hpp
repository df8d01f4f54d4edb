#ifndef RVBF_ERRORS_HPP
#define RVBF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rvbf {

// Degenerate-likelihood conditions. Callers in the batch pipeline convert
// these to per-gene flags instead of aborting the run.
class BoundaryMle : public std::runtime_error {
 public:
  explicit BoundaryMle(const std::string& direction)
      : std::runtime_error("MLE at boundary: " + direction), direction_(direction) {}
  const std::string& direction() const { return direction_; }

 private:
  std::string direction_;
};

class MixtureUndefined : public std::runtime_error {
 public:
  explicit MixtureUndefined(const std::string& what)
      : std::runtime_error("mixture prior undefined: " + what) {}
};

class UnsupportedShape : public std::runtime_error {
 public:
  explicit UnsupportedShape(const std::string& what)
      : std::runtime_error("unsupported data shape: " + what) {}
};

class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what)
      : std::runtime_error("numerical failure: " + what) {}
};

// Bad run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input files (CLI exit code 3).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rvbf

#endif
