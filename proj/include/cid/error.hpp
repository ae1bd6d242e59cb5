#ifndef CID_ERROR_HPP
#define CID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cid {

/// Failure category. The command-line tool maps these onto exit codes.
enum class ErrorKind {
  precondition,  // caller handed in data outside an operation's contract
  config,        // malformed or unknown configuration
  regime,        // data outside the regime where the solvers are expected to work
  numerical      // discretisation or convergence breakdown
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::precondition, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error(ErrorKind::regime, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace cid

#endif  // CID_ERROR_HPP
