#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

// One enum per failure class the engine distinguishes; the CLI maps these to
// process exit codes.
enum class ErrorKind {
  Input,               // rejected input / contract violation
  Evaluation,          // non-finite value with the offending point reported
  GeometryDegeneracy,  // singular or ill-conditioned metric
  NullDirection,       // homogeneous quantity requested where L <= 0
  ClosureSingularity,  // a closure denominator vanished
  DegenerateSpin,      // s == 0 handed to a spinning closure
  SignatureError,      // momentum on the wrong side of the cone
  ObserverDegeneracy,  // P.t == 0
  Constraint,          // supplementary condition violated
  Stiffness,           // step-size underflow
  Config,              // config file / schema problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};
struct EvaluationError : Error {
  explicit EvaluationError(const std::string& what) : Error(ErrorKind::Evaluation, what) {}
};
struct GeometryDegeneracyError : Error {
  explicit GeometryDegeneracyError(const std::string& what) : Error(ErrorKind::GeometryDegeneracy, what) {}
};
struct NullDirectionError : Error {
  explicit NullDirectionError(const std::string& what) : Error(ErrorKind::NullDirection, what) {}
};
struct ClosureSingularityError : Error {
  ClosureSingularityError(const std::string& scalar_name, double value, const std::string& what)
      : Error(ErrorKind::ClosureSingularity, what), scalar_name(scalar_name), value(value) {}
  std::string scalar_name;
  double value;
};
struct DegenerateSpinError : Error {
  explicit DegenerateSpinError(const std::string& what) : Error(ErrorKind::DegenerateSpin, what) {}
};
struct SignatureError : Error {
  explicit SignatureError(const std::string& what) : Error(ErrorKind::SignatureError, what) {}
};
struct ObserverDegeneracyError : Error {
  explicit ObserverDegeneracyError(const std::string& what) : Error(ErrorKind::ObserverDegeneracy, what) {}
};
struct ConstraintError : Error {
  explicit ConstraintError(const std::string& what) : Error(ErrorKind::Constraint, what) {}
};
struct StiffnessError : Error {
  explicit StiffnessError(const std::string& what) : Error(ErrorKind::Stiffness, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

}  // namespace finsler
