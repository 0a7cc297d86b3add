#ifndef PERCOLL_ERROR_HPP
#define PERCOLL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace percoll {

/// Bad argument to a public entry point (zero node count, prime below
/// target, malformed table, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A plan cannot be built for the requested spec/factor combination.
class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the interpreter; carries the failing rank and the index of the
/// instruction that was executing.
class ExecutionError : public std::runtime_error {
 public:
  ExecutionError(int rank, std::ptrdiff_t instruction, const std::string& what)
      : std::runtime_error("rank " + std::to_string(rank) + " instruction " +
                           std::to_string(instruction) + ": " + what),
        rank_(rank),
        instruction_(instruction) {}

  int rank() const noexcept { return rank_; }
  std::ptrdiff_t instruction() const noexcept { return instruction_; }

 private:
  int rank_;
  std::ptrdiff_t instruction_;
};

/// No progress within the transport's quiescence timeout.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace percoll

#endif  // PERCOLL_ERROR_HPP
