#pragma once

#include <stdexcept>
#include <string>

namespace casimir {

enum class ErrorCategory { domain, convergence, singular, io, config };

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::singular: return "singular";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory c, const std::string& what) : std::runtime_error(what), cat_(c) {}
  ErrorCategory category() const { return cat_; }

 private:
  ErrorCategory cat_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorCategory::domain, w) {}
};
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& w) : Error(ErrorCategory::convergence, w) {}
};
struct SingularError : Error {
  explicit SingularError(const std::string& w) : Error(ErrorCategory::singular, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};
struct ConfigError : Error {
  ConfigError(const std::string& w, int line = 0)
      : Error(ErrorCategory::config, line > 0 ? "line " + std::to_string(line) + ": " + w : w),
        line_(line),
        detail_(w) {}
  int line() const { return line_; }
  // message without the line prefix
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string detail_;
};

}  // namespace casimir
