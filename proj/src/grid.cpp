#include "flaglp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flaglp/error.hpp"

namespace flaglp {

double Grid::spacing() const { return std::ldexp(1.0, -L_); }

double Grid::cell_volume() const { return std::ldexp(1.0, -L_ * dims()); }

Coords Grid::coords(std::size_t flat) const {
  Coords c{};
  const std::size_t mask = side() - 1;
  for (int a = dims() - 1; a >= 0; --a) {
    c[a] = static_cast<std::int64_t>(flat & mask);
    flat >>= L_;
  }
  return c;
}

std::size_t Grid::flat(const Coords& c) const {
  std::size_t out = 0;
  const auto s = static_cast<std::int64_t>(side());
  for (int a = 0; a < dims(); ++a) {
    std::int64_t v = c[a] % s;
    if (v < 0) v += s;
    out = (out << L_) | static_cast<std::size_t>(v);
  }
  return out;
}

std::int64_t Grid::frequency(std::int64_t bin) const {
  const auto s = static_cast<std::int64_t>(side());
  return bin < s / 2 ? bin : bin - s;
}

std::size_t Grid::second_factor_index(std::size_t flat) const {
  return flat & (second_factor_size() - 1);
}

Grid make_grid(int n, int m, int L) {
  if (n < 1 || n > kMaxFactorDim || m < 1 || m > kMaxFactorDim) {
    throw ConfigError("factor dimensions must lie in [1, 3], got n=" + std::to_string(n) +
                      ", m=" + std::to_string(m));
  }
  if (L < kMinResolution || L > kMaxResolution) {
    throw ConfigError("resolution exponent must lie in [3, 14], got L=" + std::to_string(L));
  }
  // Samples are complex doubles; keep the total well inside size_t and
  // refuse anything beyond 2^30 samples.
  if (L * (n + m) > 30) {
    throw ConfigError("grid with 2^" + std::to_string(L * (n + m)) + " samples is too large");
  }
  Grid g;
  g.n_ = n;
  g.m_ = m;
  g.L_ = L;
  return g;
}

namespace {

void check_finite(std::span<const cplx> values) {
  for (const cplx& v : values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw DomainError("sampled function contains a non-finite value");
    }
  }
}

void check_same_grid(const SampledFunction& a, const SampledFunction& b) {
  if (!(a.grid() == b.grid())) throw ShapeError("sampled functions live on different grids");
}

}  // namespace

SampledFunction::SampledFunction(const Grid& grid) : grid_(grid), values_(grid.size()) {}

SampledFunction::SampledFunction(const Grid& grid, std::vector<cplx> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ShapeError("expected " + std::to_string(grid_.size()) + " samples, got " +
                     std::to_string(values_.size()));
  }
  check_finite(values_);
}

SampledFunction operator+(const SampledFunction& a, const SampledFunction& b) {
  check_same_grid(a, b);
  std::vector<cplx> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return SampledFunction(a.grid(), std::move(out));
}

SampledFunction operator-(const SampledFunction& a, const SampledFunction& b) {
  check_same_grid(a, b);
  std::vector<cplx> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return SampledFunction(a.grid(), std::move(out));
}

SampledFunction operator*(cplx c, const SampledFunction& a) {
  std::vector<cplx> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a[i];
  return SampledFunction(a.grid(), std::move(out));
}

ScaleGeometry scale_geometry(const Grid& grid, int j, int k, int N) {
  if (j < 0 || k < 0) throw RangeError("scales must be non-negative");
  if (N < 1) throw ConfigError("offset N must be at least 1");
  ScaleGeometry g;
  g.firstExponent = j + N;
  g.secondExponent = std::min(j, k) + N;
  if (g.firstExponent > grid.L() || g.secondExponent > grid.L()) {
    throw ResolutionError("scale (j=" + std::to_string(j) + ", k=" + std::to_string(k) +
                          ", N=" + std::to_string(N) + ") is finer than the grid spacing 2^-" +
                          std::to_string(grid.L()));
  }
  g.firstStride = std::size_t{1} << (grid.L() - g.firstExponent);
  g.secondStride = std::size_t{1} << (grid.L() - g.secondExponent);
  const int bits = grid.n() * g.firstExponent + grid.m() * g.secondExponent;
  g.anchorCount = std::size_t{1} << bits;
  g.samplesPerRectangle = grid.size() >> bits;
  g.measure = std::ldexp(1.0, -bits);
  return g;
}

namespace {

int axis_exponent(const Grid& grid, const ScaleGeometry& geom, int axis) {
  return axis < grid.n() ? geom.firstExponent : geom.secondExponent;
}

}  // namespace

std::size_t anchor_index(const Grid& grid, const ScaleGeometry& geom, std::size_t flat) {
  const Coords c = grid.coords(flat);
  std::size_t out = 0;
  for (int a = 0; a < grid.dims(); ++a) {
    const int e = axis_exponent(grid, geom, a);
    out = (out << e) | static_cast<std::size_t>(c[a] >> (grid.L() - e));
  }
  return out;
}

std::size_t anchor_to_grid(const Grid& grid, const ScaleGeometry& geom, std::size_t anchor) {
  Coords c{};
  for (int a = grid.dims() - 1; a >= 0; --a) {
    const int e = axis_exponent(grid, geom, a);
    c[a] = static_cast<std::int64_t>(anchor & ((std::size_t{1} << e) - 1)) << (grid.L() - e);
    anchor >>= e;
  }
  return grid.flat(c);
}

DyadicRectangle rectangle_at(const Grid& grid, const ScaleGeometry& geom, int j, int k, int N,
                             std::size_t anchor) {
  DyadicRectangle r;
  r.j = j;
  r.k = k;
  r.N = N;
  for (int a = grid.dims() - 1; a >= 0; --a) {
    const int e = axis_exponent(grid, geom, a);
    const auto v = static_cast<std::int64_t>(anchor & ((std::size_t{1} << e) - 1));
    anchor >>= e;
    if (a < grid.n()) {
      r.iIdx[a] = v;
    } else {
      r.jIdx[a - grid.n()] = v;
    }
  }
  return r;
}

std::size_t rectangle_anchor(const Grid& grid, const ScaleGeometry& geom,
                             const DyadicRectangle& r) {
  std::size_t out = 0;
  for (int a = 0; a < grid.dims(); ++a) {
    const int e = axis_exponent(grid, geom, a);
    const std::int64_t v = a < grid.n() ? r.iIdx[a] : r.jIdx[a - grid.n()];
    if (v < 0 || v >= (std::int64_t{1} << e)) throw RangeError("rectangle index out of range");
    out = (out << e) | static_cast<std::size_t>(v);
  }
  return out;
}

std::vector<DyadicRectangle> enumerate_rectangles(const Grid& grid, int j, int k, int N) {
  const ScaleGeometry geom = scale_geometry(grid, j, k, N);
  std::vector<DyadicRectangle> out;
  out.reserve(geom.anchorCount);
  for (std::size_t a = 0; a < geom.anchorCount; ++a) out.push_back(rectangle_at(grid, geom, j, k, N, a));
  return out;
}

long double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 256;
  if (values.size() <= kBlock) {
    long double s = 0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double lp_norm(std::span<const double> values, const Grid& grid, double p) {
  if (!(p > 0) || !std::isfinite(p)) throw DomainError("lp_norm needs a finite p > 0");
  std::vector<double> powered(values.size());
  double peak = 0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  if (peak == 0) return 0;
  // Scale by the peak so large p cannot overflow.
  for (std::size_t i = 0; i < values.size(); ++i) powered[i] = std::pow(std::abs(values[i]) / peak, p);
  const long double s = pairwise_sum(powered) * static_cast<long double>(grid.cell_volume());
  return peak * static_cast<double>(std::pow(s, 1.0L / p));
}

double lp_norm(const SampledFunction& f, double p) {
  std::vector<double> mags(f.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(f[i]);
  return lp_norm(mags, f.grid(), p);
}

}  // namespace flaglp
