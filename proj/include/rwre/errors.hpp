#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rwre {

// Every failure the library reports carries a short machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  std::string_view kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct InvalidModel : Error {
  explicit InvalidModel(const std::string& m) : Error("invalid_model", m) {}
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& m) : Error("invalid_config", m) {}
};

struct BudgetExceeded : Error {
  explicit BudgetExceeded(const std::string& m) : Error("budget_exceeded", m) {}
};

struct PreconditionViolation : Error {
  explicit PreconditionViolation(const std::string& m)
      : Error("precondition_violation", m) {}
};

struct AcceptanceStarved : Error {
  explicit AcceptanceStarved(const std::string& m) : Error("acceptance_starved", m) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& m) : Error("insufficient_data", m) {}
};

struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& m) : Error("length_mismatch", m) {}
};

struct OutOfRange : Error {
  explicit OutOfRange(const std::string& m) : Error("out_of_range", m) {}
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& m, double last_gap)
      : Error("no_convergence", m), last_gap_(last_gap) {}
  double last_gap() const noexcept { return last_gap_; }

 private:
  double last_gap_;
};

}  // namespace rwre
