#pragma once

#include <string>

#include "flaglp/filters.hpp"
#include "flaglp/transform.hpp"

namespace flaglp {

/// (sum_{j,k} |psi_{j,k} * f|^2)^{1/2} pointwise; the low-pass channel is
/// not part of the sum.
SampledFunction g_flag(const SampledFunction& f, const FilterBank& bank);

/// (sum_R |c_R|^2 chi_R)^{1/2}: piecewise constant on rectangles.
SampledFunction g_flag_discrete(const CoefficientField& coeffs);

/// ||g_flag_discrete(analyze(f))||_p for p in (0, 1].
double hardy_norm(const SampledFunction& f, const FilterBank& bank, double p, int N);

/// L^p norm for p > 1 (where the flag Hardy space is L^p) and hardy_norm
/// otherwise.
double hardy_type_norm(const SampledFunction& f, const FilterBank& bank, double p, int N);

enum class CellStatistic { Sup, Anchor, Inf };

/// Discrete square function whose rectangle value is the sup, anchor value
/// or inf of |psi_{j,k} * f| over the grid samples inside the rectangle.
SampledFunction cell_square_function(const SampledFunction& f, const FilterBank& bank, int N,
                                     CellStatistic statistic);

struct PPReport {
  double p = 0;
  double supNorm = 0;
  double infNorm = 0;
  double ratio = 1;
  bool degenerate = false;  // both norms zero; ratio reported as 1
  std::string bankA;
  std::string bankB;
};

/// Sup-over-cell version with bankA against inf-over-cell version with bankB.
PPReport pp_compare(const SampledFunction& f, const FilterBank& bankA, const FilterBank& bankB,
                    double p, int N);

}  // namespace flaglp
