#pragma once

#include <stdexcept>
#include <string>

namespace dotlab {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DOTLAB_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  }

// device_electrostatics
DOTLAB_DEFINE_ERROR(NonPositiveDimension);
DOTLAB_DEFINE_ERROR(OverlappingGates);
DOTLAB_DEFINE_ERROR(InvalidGrid);
DOTLAB_DEFINE_ERROR(NonlinearResponse);
DOTLAB_DEFINE_ERROR(UnknownGate);
// orbitals
DOTLAB_DEFINE_ERROR(GridTooCoarse);
DOTLAB_DEFINE_ERROR(EigensolverFailure);
DOTLAB_DEFINE_ERROR(NotADoublet);
// fci
DOTLAB_DEFINE_ERROR(BasisTooLarge);
DOTLAB_DEFINE_ERROR(InconsistentDimensions);
DOTLAB_DEFINE_ERROR(ProblemTooLarge);
// hubbard
DOTLAB_DEFINE_ERROR(InconsistentInput);
DOTLAB_DEFINE_ERROR(ChargeSectorLeak);
DOTLAB_DEFINE_ERROR(PoorFit);
DOTLAB_DEFINE_ERROR(RegimeViolation);
// esr_spectra
DOTLAB_DEFINE_ERROR(DegenerateJacobian);
DOTLAB_DEFINE_ERROR(InsufficientData);
// harness
DOTLAB_DEFINE_ERROR(ConfigError);

#undef DOTLAB_DEFINE_ERROR

/// Iterative solver ran out of budget before reaching its tolerance.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int iterations, double residual)
      : Error("NoConvergence", what + " (iterations=" + std::to_string(iterations) +
                                   ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace dotlab
