#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace turboshape {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

/// An inside triangle is inverted or violates the minimum angle.
class DegenerateMeshError : public Error {
 public:
  DegenerateMeshError(const std::string& what, int triangle, double angle_deg)
      : Error(what), triangle_(triangle), angle_deg_(angle_deg) {}
  const char* kind() const noexcept override { return "degenerate_mesh"; }
  int triangle() const { return triangle_; }
  double angle_deg() const { return angle_deg_; }

 private:
  int triangle_;
  double angle_deg_;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "singular_system"; }
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  const char* kind() const noexcept override { return "solver_nonconvergence"; }
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Channel march produced v <= 0 or T <= 0.
class NonPhysicalStateError : public Error {
 public:
  NonPhysicalStateError(const std::string& what, int cell) : Error(what), cell_(cell) {}
  const char* kind() const noexcept override { return "nonphysical_state"; }
  int cell() const { return cell_; }

 private:
  int cell_;
};

class StepTooLargeError : public Error {
 public:
  StepTooLargeError(const std::string& what, double max_step) : Error(what), max_step_(max_step) {}
  const char* kind() const noexcept override { return "step_too_large"; }
  double max_admissible_step() const { return max_step_; }

 private:
  double max_step_;
};

/// Carries every problem found in a configuration, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : Error(join(errors)), errors_(std::move(errors)) {}
  const char* kind() const noexcept override { return "config"; }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s;
    for (const auto& x : e) s += (s.empty() ? "" : "; ") + x;
    return s;
  }
  std::vector<std::string> errors_;
};

}  // namespace turboshape
