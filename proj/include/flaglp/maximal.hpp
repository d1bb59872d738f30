#pragma once

#include <span>
#include <vector>

#include "flaglp/grid.hpp"

namespace flaglp {

enum class MaximalFamily { DyadicCubes, DyadicRectangles };

struct MaximalConfig {
  MaximalFamily family = MaximalFamily::DyadicRectangles;
  /// Largest side length considered; the torus itself is side 1.
  double dilationCap = 1.0;
};

/// Dyadic Hardy-Littlewood maximal function: max over the dyadic cubes
/// containing each point of the average of |f|.
SampledFunction hl_maximal(const SampledFunction& f, double dilationCap = 1.0);

/// Dyadic strong maximal function: every axis gets its own dyadic side.
SampledFunction strong_maximal(const SampledFunction& f, double dilationCap = 1.0);

SampledFunction maximal(const SampledFunction& f, const MaximalConfig& config);

/// Real-valued variant working on |values| directly.
std::vector<double> strong_maximal_abs(const Grid& grid, std::span<const double> values,
                                       double dilationCap = 1.0);

/// {M_s(chi_Omega) >= threshold} (inclusive) or > threshold (strict).
std::vector<char> dilated_set(const Grid& grid, std::span<const char> omega, double threshold = 0.5,
                              bool strict = false);

struct FeffermanSteinReport {
  double r = 0;
  double p = 0;
  double numerator = 0;
  double denominator = 0;
  double ratio = 1;
  bool degenerate = false;
};

/// ||(sum_k (M_s f_k)^r)^{1/r}||_p / ||(sum_k |f_k|^r)^{1/r}||_p. Throws
/// DomainError for r <= 1 or p <= 1 and ConfigError for an empty family.
FeffermanSteinReport fs_vector_check(std::span<const SampledFunction> family, double r, double p);

}  // namespace flaglp
