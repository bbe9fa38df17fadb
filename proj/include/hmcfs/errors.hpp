// Exception types. Every failure that a caller may want to branch on has its
// own type; the CLI maps them onto exit codes.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hmcfs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model record or input file violates a structural invariant. `field`
/// names the offending member, `index` the offending entry when one exists.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string index, const std::string& what)
      : Error(field + (index.empty() ? "" : "[" + index + "]") + ": " + what),
        field_(std::move(field)),
        index_(std::move(index)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& index() const noexcept { return index_; }

 private:
  std::string field_;
  std::string index_;
};

/// The observation has probability zero under the model given the past.
class ImpossibleObservation : public Error {
 public:
  explicit ImpossibleObservation(std::int64_t t, int symbol = -1)
      : Error("impossible observation at t=" + std::to_string(t) +
              (symbol >= 0 ? " (y=" + std::to_string(symbol + 1) + ")" : "")),
        t_(t) {}

  std::int64_t time() const noexcept { return t_; }

 private:
  std::int64_t t_;
};

/// G_x is undefined because some output has zero predicted mass.
class SingularOutputMass : public Error {
 public:
  explicit SingularOutputMass(int output)
      : Error("output " + std::to_string(output + 1) + " has zero mass under G x"),
        output_(output) {}

  int output() const noexcept { return output_; }

 private:
  int output_;
};

/// Exhaustive enumeration would exceed the configured atom budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::uint64_t atoms, std::uint64_t budget)
      : Error("enumeration needs " + std::to_string(atoms) + " atoms, budget is " +
              std::to_string(budget)),
        atoms_(atoms),
        budget_(budget) {}

  std::uint64_t atoms() const noexcept { return atoms_; }
  std::uint64_t budget() const noexcept { return budget_; }

 private:
  std::uint64_t atoms_;
  std::uint64_t budget_;
};

}  // namespace hmcfs
