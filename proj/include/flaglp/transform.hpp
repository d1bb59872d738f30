#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flaglp/filters.hpp"
#include "flaglp/grid.hpp"

namespace flaglp {

/// Values attached to every rectangle of one scale pair, indexed by the
/// anchor lattice (first-factor axes slowest).
struct ScaleSlot {
  int j = 0;
  int k = 0;
  ScaleGeometry geometry;
  std::vector<cplx> values;
};

/// Coefficients {c_R} over all dyadic rectangles of a bank's scale window,
/// plus a full-grid low-pass channel. Also the carrier for arbitrary
/// sequences in the s^p / c^p sequence spaces.
class CoefficientField {
 public:
  /// Zero field; throws ResolutionError if any anchor lattice is finer than
  /// the grid.
  CoefficientField(const Grid& grid, int N, ScaleRange jRange, ScaleRange kRange);

  const Grid& grid() const { return grid_; }
  int N() const { return N_; }
  ScaleRange j_range() const { return jRange_; }
  ScaleRange k_range() const { return kRange_; }

  std::span<const ScaleSlot> slots() const { return slots_; }
  std::span<ScaleSlot> slots() { return slots_; }
  const ScaleSlot& slot(int j, int k) const;
  ScaleSlot& slot(int j, int k);

  std::span<const cplx> low_pass() const { return lowPass_; }
  std::vector<cplx>& low_pass() { return lowPass_; }

  std::size_t rectangle_count() const;
  bool same_shape(const CoefficientField& other) const;

 private:
  Grid grid_;
  int N_;
  ScaleRange jRange_;
  ScaleRange kRange_;
  std::vector<ScaleSlot> slots_;
  std::vector<cplx> lowPass_;
};

/// Coefficient field shaped for `bank` at offset N (all zeros).
CoefficientField empty_field(const FilterBank& bank, int N);

/// psi_{j,k} * f sampled at every anchor (x_I, y_J); low-pass kept at full
/// resolution.
CoefficientField analyze(const SampledFunction& f, const FilterBank& bank, int N);

/// Full-grid convolution psi_{j,k} * f.
std::vector<cplx> channel_convolution(const SampledFunction& f, const FilterBank& bank, int j,
                                      int k);

/// Same from a precomputed unnormalized spectrum FFT(f).
std::vector<cplx> channel_from_spectrum(const FilterBank& bank, std::span<const cplx> spectrum, int j,
                                        int k);

/// sum_{j,k} psi_{j,k} * psi_{j,k} * f plus the low-pass channel applied twice.
SampledFunction synthesize_continuous(const SampledFunction& f, const FilterBank& bank);

/// sum_R |I||J| phi~_{j,k}(x - x_I, y - y_J) c_R + low-pass channel, where
/// |R| phi~ is psi_{j,k} integrated over the cell R.
SampledFunction synthesize_discrete(const CoefficientField& coeffs, const FilterBank& bank);

/// T_N = synthesize_discrete o analyze.
SampledFunction apply_tn(const SampledFunction& f, const FilterBank& bank, int N);
/// Hilbert-space adjoint of T_N.
SampledFunction apply_tn_adjoint(const SampledFunction& f, const FilterBank& bank, int N);

/// R(f) = f - T_N(f).
SampledFunction remainder_apply(const SampledFunction& f, const FilterBank& bank, int N);

/// Power iteration on R*R; returns the estimate of ||R||_{2->2}.
double remainder_norm_estimate(const FilterBank& bank, int N, int steps = 20,
                               std::uint64_t seed = 0x5eed);

struct NeumannResult {
  SampledFunction g;
  int iterations = 0;
  double probeContraction = 0;
  /// ||T_N(g) - f||_2 / ||f||_2 of the returned g (0 for f = 0).
  double relativeResidual = 0;
};

/// Solves T_N g = f by g <- f + R(g). Throws DivergenceError when a probe
/// shows ||R p|| >= ||p||, ConvergenceError past `maxIterations`.
NeumannResult neumann_inverse(const SampledFunction& f, const FilterBank& bank, int N,
                              double tol = 1e-8, int maxIterations = 200);

/// JSON manifest {n,m,L,N,jRange,kRange,slots} plus one block per slot and
/// one for the low-pass channel.
void save_coefficients(const CoefficientField& coeffs, const std::filesystem::path& dir);
/// Reads a directory written by save_coefficients.
CoefficientField load_coefficients(const std::filesystem::path& dir);

}  // namespace flaglp
