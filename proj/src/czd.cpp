#include "flaglp/czd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "flaglp/carleson.hpp"
#include "flaglp/error.hpp"
#include "flaglp/maximal.hpp"
#include "flaglp/squarefuncs.hpp"

namespace flaglp {

namespace {

double l2(const SampledFunction& f) {
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(f[i]);
  return std::sqrt(static_cast<double>(pairwise_sum(sq) * static_cast<long double>(f.grid().cell_volume())));
}

}  // namespace

SampledFunction cz_square_function(const SampledFunction& f, const FilterBank& bank, int N, double neumannTol) {
  const NeumannResult nr = neumann_inverse(f, bank, N, neumannTol);
  return g_flag_discrete(analyze(nr.g, bank, N));
}

CZResult cz_decompose(const SampledFunction& f, const FilterBank& bank, double alpha, int N, double p, double p1,
                      double p2, const CZOptions& options) {
  if (!(alpha > 0)) throw DomainError("alpha must be positive");
  if (!(p2 > 0) || p2 > 1 || !(p2 < p) || !(p < p1) || !std::isfinite(p1)) {
    throw DomainError("exponents must satisfy 0 < p2 <= 1 and p2 < p < p1 < infinity");
  }
  const Grid& grid = f.grid();
  const NeumannResult nr = neumann_inverse(f, bank, N, options.neumannTol);
  const CoefficientField coeffs = analyze(nr.g, bank, N);
  const SampledFunction S = g_flag_discrete(coeffs);

  // level[x] = number of l with S(x) > alpha 2^l, so x lies in Omega_0 ..
  // Omega_{level-1}.
  std::vector<int> level(grid.size(), 0);
  int levels = 0;
  for (std::size_t i = 0; i < level.size(); ++i) {
    const double s = S[i].real();
    int l = 0;
    while (s > alpha * std::ldexp(1.0, l)) ++l;
    level[i] = l;
    levels = std::max(levels, l);
  }
  CZReport rep;
  rep.alpha = alpha;
  rep.p = p;
  rep.p1 = p1;
  rep.p2 = p2;
  rep.neumannIterations = nr.iterations;
  rep.dilationThreshold = options.dilationThreshold;
  for (int l = 0; l <= levels; ++l) {
    std::size_t count = 0;
    for (int v : level) count += v > l ? 1 : 0;
    rep.levelSetMeasures.push_back(static_cast<double>(count) * grid.cell_volume());
  }

  std::vector<std::vector<char>> dilated(static_cast<std::size_t>(levels));
  std::vector<std::unique_ptr<OpenSetApprox>> dilatedSets(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    std::vector<char> omega(grid.size());
    for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = level[i] > l;
    auto d = dilated_set(grid, omega, options.dilationThreshold, false);
    if (std::find(d.begin(), d.end(), char{1}) != d.end()) {
      dilatedSets[static_cast<std::size_t>(l)] = std::make_unique<OpenSetApprox>(OpenSetApprox::from_mask(grid, std::move(d), N));
    }
  }

  CoefficientField good = empty_field(bank, N);
  CoefficientField bad = empty_field(bank, N);
  good.low_pass().assign(coeffs.low_pass().begin(), coeffs.low_pass().end());
  rep.classCounts.assign(static_cast<std::size_t>(levels) + 1, 0);
  const auto src = coeffs.slots();
  auto gslots = good.slots();
  auto bslots = bad.slots();
  for (std::size_t s = 0; s < src.size(); ++s) {
    const ScaleSlot& slot = src[s];
    // Histogram of sample levels per rectangle.
    std::vector<std::vector<std::uint32_t>> hist(slot.values.size(),
                                                 std::vector<std::uint32_t>(static_cast<std::size_t>(levels) + 1, 0));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ++hist[anchor_index(grid, slot.geometry, i)][static_cast<std::size_t>(level[i])];
    }
    const double half = 0.5 * static_cast<double>(slot.geometry.samplesPerRectangle);
    for (std::size_t a = 0; a < slot.values.size(); ++a) {
      // |R cap Omega_l| counts samples with level > l.
      int cls = 0;
      std::uint64_t inside = slot.geometry.samplesPerRectangle - hist[a][0];
      while (static_cast<double>(inside) >= half) {
        ++cls;
        inside -= hist[a][static_cast<std::size_t>(cls)];
      }
      ++rep.classCounts[static_cast<std::size_t>(cls)];
      if (cls == 0) {
        gslots[s].values[a] = slot.values[a];
        continue;
      }
      bslots[s].values[a] = slot.values[a];
      if (slot.values[a] == 0.0) continue;
      const auto& set = dilatedSets[static_cast<std::size_t>(cls - 1)];
      if (!set || !set->contains(slot.geometry, a)) ++rep.supportViolations;
    }
  }

  SampledFunction g = synthesize_discrete(good, bank);
  SampledFunction b = synthesize_discrete(bad, bank);
  const double fl2 = l2(f);
  rep.additivityError = fl2 == 0 ? l2(g + b - f) : l2(g + b - f) / fl2;
  rep.gNorm = hardy_type_norm(g, bank, p1, N);
  rep.bNorm = hardy_type_norm(b, bank, p2, N);
  rep.fNorm = hardy_type_norm(f, bank, p, N);
  const double fp = std::pow(rep.fNorm, p);
  if (fp > 0) {
    rep.fittedC_g = std::pow(rep.gNorm, p1) / (std::pow(alpha, p1 - p) * fp);
    rep.fittedC_b = std::pow(rep.bNorm, p2) / (std::pow(alpha, p2 - p) * fp);
  }
  return CZResult{std::move(g), std::move(b), std::move(rep)};
}

InterpolationReport interpolation_experiment(const std::string& tag, const Operator& op, double p1, double p2,
                                             std::span<const double> pGrid, std::span<const SampledFunction> corpus,
                                             const FilterBank& bank, int N) {
  if (pGrid.empty()) throw ConfigError("exponent grid is empty");
  const auto [lo, hi] = std::minmax_element(pGrid.begin(), pGrid.end());
  if (!(p2 > 0) || !(p2 < *lo) || !(*hi < p1)) throw DomainError("need p2 < min(pGrid) and max(pGrid) < p1");
  InterpolationReport rep;
  rep.op = tag;
  rep.p1 = p1;
  rep.p2 = p2;
  std::vector<SampledFunction> images;
  images.reserve(corpus.size());
  for (const auto& f : corpus) images.push_back(op(f));
  auto measure = [&](double p, bool endpoint) {
    InterpolationRow row{p, 0.0, endpoint};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const double num = lp_norm(images[i], p);
      const double den = hardy_type_norm(corpus[i], bank, p, N);
      const double r = den == 0 ? (num == 0 ? 0.0 : std::numeric_limits<double>::infinity()) : num / den;
      row.maxRatio = std::max(row.maxRatio, r);
    }
    rep.rows.push_back(row);
  };
  measure(p2, true);
  for (double p : pGrid) measure(p, false);
  measure(p1, true);
  for (const auto& row : rep.rows) {
    if (row.endpoint) {
      rep.endpointMax = std::max(rep.endpointMax, row.maxRatio);
    } else {
      rep.intermediateMax = std::max(rep.intermediateMax, row.maxRatio);
    }
  }
  rep.bounded = rep.intermediateMax <= 10.0 * rep.endpointMax;
  return rep;
}

}  // namespace flaglp
