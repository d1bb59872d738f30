#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flaglp/grid.hpp"

namespace flaglp {

enum class FilterMode { FrequencyAnnulus, CompactSpatial };

/// Radii are angular frequencies (radians per unit length): scale j of the
/// annulus family lives on innerRadius*2^j <= |xi| <= outerRadius*2^j.
struct FilterProfile {
  double innerRadius = 0.5;
  double outerRadius = 2.0;
  /// Exponent s of the transition bump exp(-1/t^s); 1 is the standard bump.
  double smoothness = 1.0;
  FilterMode mode = FilterMode::FrequencyAnnulus;
  /// Vanishing-moment order M0 for compact-spatial banks.
  int momentOrder = 1;
};

/// Throws ConfigError unless 0 < inner < outer, outer in (2*inner, 4*inner]
/// (telescoping needs the transition band to be non-empty, and scales two
/// apart must not overlap) and smoothness > 0.
void validate_profile(const FilterProfile& profile);

struct ScaleRange {
  int lo = 0;
  int hi = -1;
  bool contains(int s) const { return s >= lo && s <= hi; }
  int count() const { return hi >= lo ? hi - lo + 1 : 0; }
};

/// Frequency responses of the one-parameter families psi^(1)_j on the full
/// (n+m)-torus and psi^(2)_k on the m-torus, plus the low-pass completions.
/// Filters are real and even, so the responses are stored as doubles in FFT
/// bin order. Immutable after construction.
class FilterBank {
 public:
  const Grid& grid() const { return grid_; }
  const FilterProfile& profile() const { return profile_; }
  FilterMode mode() const { return profile_.mode; }
  int N() const { return N_; }
  ScaleRange j_range() const { return jRange_; }
  ScaleRange k_range() const { return kRange_; }

  std::span<const double> psi1_hat(int j) const;
  std::span<const double> psi2_hat(int k) const;
  /// Completes sum_j |psi1_hat|^2 to 1 (low and high frequency remainder).
  std::span<const double> low_pass1_hat() const { return lowPass1_; }
  std::span<const double> low_pass2_hat() const { return lowPass2_; }
  /// Flag low-pass: |lp|^2 = 1 - (sum_j |psi1|^2)(sum_k |psi2|^2).
  std::span<const double> low_pass_hat() const { return lowPass_; }

  double calderon_residual1() const { return residual1_; }
  double calderon_residual2() const { return residual2_; }
  /// nullopt for annulus banks (every moment vanishes).
  std::optional<int> moment_order() const { return momentOrder_; }

  /// True when psi_{j,k} vanishes at every lattice frequency.
  bool channel_is_zero(int j, int k) const;
  std::string id() const;

  /// Exact spatial samples of the compact-mode generators; empty in annulus
  /// mode (use filter_spatial there).
  std::span<const double> compact_psi1(int j) const;
  std::span<const double> compact_psi2(int k) const;

 private:
  friend FilterBank build_filter_bank(const Grid&, const FilterProfile&, int);
  friend FilterBank build_compact_bank(const Grid&, int, int);

  Grid grid_;
  FilterProfile profile_;
  int N_ = 1;
  ScaleRange jRange_;
  ScaleRange kRange_;
  std::vector<std::vector<double>> psi1_;
  std::vector<std::vector<double>> psi2_;
  std::vector<std::vector<double>> compact1_;
  std::vector<std::vector<double>> compact2_;
  std::vector<double> lowPass1_;
  std::vector<double> lowPass2_;
  std::vector<double> lowPass_;
  std::vector<char> channelZero_;
  double residual1_ = 0;
  double residual2_ = 0;
  std::optional<int> momentOrder_;
};

/// Smooth radial cutoff: 1 for r <= lo, 0 for r >= hi.
double smooth_cutoff(double r, double lo, double hi, double smoothness);

/// Annulus bank with jRange = kRange = [0, L-N-1]. Throws ResolutionError
/// when that range is empty and ConfigError for an invalid profile.
FilterBank build_filter_bank(const Grid& grid, const FilterProfile& profile, int N);

/// Compact-spatial bank: radial generators supported in balls of radius
/// 2^-j (2^-k) whose discrete moments vanish through order M0. Scales start
/// at 2 so the supports fit inside the torus.
FilterBank build_compact_bank(const Grid& grid, int M0, int N);

/// Frequency response of psi_{j,k} = psi^(1)_j *_2 psi^(2)_k over the full
/// grid: psi1_hat(j)(xi1, xi2) * psi2_hat(k)(xi2). Throws RangeError.
std::vector<double> lift_flag_filter(const FilterBank& bank, int j, int k);

/// Spatial samples sum_q hat(q) e^{2 pi i q.x} of a full-grid response.
std::vector<double> filter_spatial(const Grid& grid, std::span<const double> response);
/// Same on the m-dimensional second-factor lattice.
std::vector<double> second_factor_spatial(const Grid& grid, std::span<const double> response);

/// Writes one block per filter plus manifest.json into `dir`.
void export_bank(const FilterBank& bank, const std::filesystem::path& dir);

}  // namespace flaglp
