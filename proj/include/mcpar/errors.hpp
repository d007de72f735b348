#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcpar {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A realization failed inside a task; carries both indices so the run can be
// replayed from its seed.
class ProblemError : public Error {
 public:
  ProblemError(std::size_t task_index, std::size_t realization_index, const std::string& what)
      : Error("task " + std::to_string(task_index) + ", realization " +
              std::to_string(realization_index) + ": " + what),
        task_index_(task_index),
        realization_index_(realization_index) {}

  std::size_t task_index() const noexcept { return task_index_; }
  std::size_t realization_index() const noexcept { return realization_index_; }

 private:
  std::size_t task_index_;
  std::size_t realization_index_;
};

class UnknownTask : public Error {
 public:
  using Error::Error;
};
class MissingTask : public Error {
 public:
  using Error::Error;
};
class DuplicateTask : public Error {
 public:
  using Error::Error;
};

class NonFiniteSample : public Error {
 public:
  using Error::Error;
};
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};
class DegenerateSample : public Error {
 public:
  using Error::Error;
};
class SpecMismatch : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class InvalidModulus : public Error {
 public:
  using Error::Error;
};
class SingularSystem : public Error {
 public:
  using Error::Error;
};

class NonConvergentStep : public Error {
 public:
  NonConvergentStep(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class InvarianceViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace mcpar
