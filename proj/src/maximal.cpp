#include "flaglp/maximal.hpp"

#include <algorithm>
#include <cmath>

#include "flaglp/error.hpp"

namespace flaglp {

namespace {

// Replaces every value by the mean over its aligned block of 2^b samples
// along `axis`.
std::vector<double> block_average(const Grid& grid, const std::vector<double>& in, int axis, int b) {
  if (b == 0) return in;
  const int L = grid.L();
  const int shift = L * (grid.dims() - 1 - axis);
  const std::size_t stride = std::size_t{1} << shift;
  const std::size_t block = std::size_t{1} << b;
  const std::size_t side = grid.side();
  std::vector<double> out(in.size());
  const double inv = 1.0 / static_cast<double>(block);
  // Iterate over lines along the axis.
  for (std::size_t base = 0; base < in.size(); ++base) {
    if (((base >> shift) & (side - 1)) != 0) continue;
    for (std::size_t start = 0; start < side; start += block) {
      double s = 0;
      for (std::size_t c = start; c < start + block; ++c) s += in[base + c * stride];
      s *= inv;
      for (std::size_t c = start; c < start + block; ++c) out[base + c * stride] = s;
    }
  }
  return out;
}

int max_block_exponent(const Grid& grid, double cap) {
  if (!(cap > 0) || cap > 1) throw ConfigError("dilation cap must lie in (0, 1]");
  // Side 2^{b-L} must not exceed the cap.
  int b = grid.L();
  while (b > 0 && std::ldexp(1.0, b - grid.L()) > cap) --b;
  return b;
}

void strong_recurse(const Grid& grid, const std::vector<double>& current, int axis, int maxB,
                    std::vector<double>& best) {
  if (axis == grid.dims()) {
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::max(best[i], current[i]);
    return;
  }
  for (int b = 0; b <= maxB; ++b) {
    strong_recurse(grid, block_average(grid, current, axis, b), axis + 1, maxB, best);
  }
}

std::vector<double> magnitudes(const SampledFunction& f) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(f[i]);
  return v;
}

SampledFunction to_function(const Grid& grid, const std::vector<double>& v) {
  return SampledFunction(grid, std::vector<cplx>(v.begin(), v.end()));
}

}  // namespace

std::vector<double> strong_maximal_abs(const Grid& grid, std::span<const double> values, double dilationCap) {
  if (values.size() != grid.size()) throw ShapeError("values do not match grid");
  const int maxB = max_block_exponent(grid, dilationCap);
  std::vector<double> abs(values.size());
  for (std::size_t i = 0; i < abs.size(); ++i) abs[i] = std::abs(values[i]);
  std::vector<double> best(values.size(), 0.0);
  strong_recurse(grid, abs, 0, maxB, best);
  return best;
}

SampledFunction strong_maximal(const SampledFunction& f, double dilationCap) {
  const auto v = magnitudes(f);
  return to_function(f.grid(), strong_maximal_abs(f.grid(), v, dilationCap));
}

SampledFunction hl_maximal(const SampledFunction& f, double dilationCap) {
  const Grid& grid = f.grid();
  const int maxB = max_block_exponent(grid, dilationCap);
  const auto abs = magnitudes(f);
  std::vector<double> best(abs.size(), 0.0);
  for (int b = 0; b <= maxB; ++b) {
    std::vector<double> cur = abs;
    for (int a = 0; a < grid.dims(); ++a) cur = block_average(grid, cur, a, b);
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::max(best[i], cur[i]);
  }
  return to_function(grid, best);
}

SampledFunction maximal(const SampledFunction& f, const MaximalConfig& config) {
  return config.family == MaximalFamily::DyadicCubes ? hl_maximal(f, config.dilationCap)
                                                     : strong_maximal(f, config.dilationCap);
}

std::vector<char> dilated_set(const Grid& grid, std::span<const char> omega, double threshold, bool strict) {
  if (omega.size() != grid.size()) throw ShapeError("set mask does not match grid");
  std::vector<double> chi(omega.size());
  for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = omega[i] ? 1.0 : 0.0;
  const auto ms = strong_maximal_abs(grid, chi);
  std::vector<char> out(ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) out[i] = strict ? ms[i] > threshold : ms[i] >= threshold;
  return out;
}

FeffermanSteinReport fs_vector_check(std::span<const SampledFunction> family, double r, double p) {
  if (!(r > 1) || !(p > 1)) throw DomainError("Fefferman-Stein check needs r > 1 and p > 1");
  if (family.empty()) throw ConfigError("empty function family");
  const Grid& grid = family.front().grid();
  std::vector<double> num(grid.size(), 0.0);
  std::vector<double> den(grid.size(), 0.0);
  for (const SampledFunction& f : family) {
    if (!(f.grid() == grid)) throw ShapeError("family members live on different grids");
    const auto abs = magnitudes(f);
    const auto ms = strong_maximal_abs(grid, abs);
    for (std::size_t i = 0; i < num.size(); ++i) {
      num[i] += std::pow(ms[i], r);
      den[i] += std::pow(abs[i], r);
    }
  }
  for (std::size_t i = 0; i < num.size(); ++i) {
    num[i] = std::pow(num[i], 1.0 / r);
    den[i] = std::pow(den[i], 1.0 / r);
  }
  FeffermanSteinReport rep;
  rep.r = r;
  rep.p = p;
  rep.numerator = lp_norm(num, grid, p);
  rep.denominator = lp_norm(den, grid, p);
  if (rep.denominator == 0) {
    rep.ratio = 1;
    rep.degenerate = true;
  } else {
    rep.ratio = rep.numerator / rep.denominator;
  }
  return rep;
}

}  // namespace flaglp
