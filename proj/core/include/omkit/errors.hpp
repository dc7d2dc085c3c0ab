#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace omkit {

/// Raised when a parameter set violates one or more invariants. Every
/// violation found is listed, not just the first.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

inline void throw_if_any(std::vector<std::string> problems) {
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

}  // namespace omkit
