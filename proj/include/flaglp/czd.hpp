#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flaglp/filters.hpp"
#include "flaglp/transform.hpp"

namespace flaglp {

struct CZReport {
  double alpha = 0;
  double p = 0;
  double p1 = 0;
  double p2 = 0;
  double gNorm = 0;
  double bNorm = 0;
  double fNorm = 0;
  double fittedC_g = 0;
  double fittedC_b = 0;
  /// |Omega_l| for l = 0, 1, ... up to the first empty level set.
  std::vector<double> levelSetMeasures;
  /// Rectangles per class; entry 0 is the good class R_0.
  std::vector<std::size_t> classCounts;
  /// b-rectangles R in class l >= 1 not contained in the dilated set of
  /// Omega_{l-1}.
  std::size_t supportViolations = 0;
  double additivityError = 0;  // ||g + b - f||_2 / ||f||_2
  int neumannIterations = 0;
  double dilationThreshold = 0.5;
};

struct CZResult {
  SampledFunction g;
  SampledFunction b;
  CZReport report;
};

struct CZOptions {
  double dilationThreshold = 0.5;
  double neumannTol = 1e-10;
};

/// Stopping-time decomposition f = g + b at height alpha. Throws DomainError
/// unless 0 < p2 <= 1, p2 < p < p1 and alpha > 0.
CZResult cz_decompose(const SampledFunction& f, const FilterBank& bank, double alpha, int N,
                      double p, double p1, double p2, const CZOptions& options = {});

/// Discrete square function S(f) that drives the level sets.
SampledFunction cz_square_function(const SampledFunction& f, const FilterBank& bank, int N,
                                   double neumannTol = 1e-10);

using Operator = std::function<SampledFunction(const SampledFunction&)>;

struct InterpolationRow {
  double p = 0;
  double maxRatio = 0;
  bool endpoint = false;
};

struct InterpolationReport {
  std::string op;
  double p1 = 0;
  double p2 = 0;
  std::vector<InterpolationRow> rows;
  double endpointMax = 0;
  double intermediateMax = 0;
  bool bounded = true;  // intermediate ratios within 10x the endpoint max
};

/// ||T f||_p / hardy_type_norm(f, p) maximized over the corpus, for p2,
/// every p in pGrid, and p1. Throws DomainError unless
/// p2 < min(pGrid) and max(pGrid) < p1.
InterpolationReport interpolation_experiment(const std::string& tag, const Operator& op,
                                             double p1, double p2, std::span<const double> pGrid,
                                             std::span<const SampledFunction> corpus,
                                             const FilterBank& bank, int N);

}  // namespace flaglp
