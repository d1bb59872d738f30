#pragma once

#include <stdexcept>
#include <string>

namespace flaglp {

// Every failure raised by the library derives from Error; the kind lets the
// CLI map failures onto exit codes without string matching.
enum class ErrorKind {
  Configuration,
  Resolution,
  Domain,
  Shape,
  Range,
  Divergence,
  Convergence,
  Kernel,
  Integration,
  Truncation,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FLAGLP_DEFINE_ERROR(Name, Kind)                                        \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}   \
  }

FLAGLP_DEFINE_ERROR(ConfigError, Configuration);
FLAGLP_DEFINE_ERROR(ResolutionError, Resolution);
FLAGLP_DEFINE_ERROR(DomainError, Domain);
FLAGLP_DEFINE_ERROR(ShapeError, Shape);
FLAGLP_DEFINE_ERROR(RangeError, Range);
FLAGLP_DEFINE_ERROR(DivergenceError, Divergence);
FLAGLP_DEFINE_ERROR(ConvergenceError, Convergence);
FLAGLP_DEFINE_ERROR(KernelError, Kernel);
FLAGLP_DEFINE_ERROR(IntegrationError, Integration);
FLAGLP_DEFINE_ERROR(TruncationError, Truncation);
FLAGLP_DEFINE_ERROR(IoError, Io);

#undef FLAGLP_DEFINE_ERROR

}  // namespace flaglp
