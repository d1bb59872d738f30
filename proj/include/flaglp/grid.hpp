#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flaglp {

using cplx = std::complex<double>;

inline constexpr int kMaxFactorDim = 3;
inline constexpr int kMaxDims = 2 * kMaxFactorDim;
inline constexpr int kMinResolution = 3;
inline constexpr int kMaxResolution = 14;

/// Integer lattice coordinates, one entry per axis; only the first
/// Grid::dims() entries are meaningful.
using Coords = std::array<std::int64_t, kMaxDims>;

/// Uniform periodic sampling of the unit torus T^n x T^m with 2^L samples per
/// axis. Axes 0..n-1 belong to the first factor, n..n+m-1 to the second.
class Grid {
 public:
  Grid() = default;

  int n() const { return n_; }
  int m() const { return m_; }
  int L() const { return L_; }
  int dims() const { return n_ + m_; }
  std::size_t side() const { return std::size_t{1} << L_; }
  std::size_t size() const { return std::size_t{1} << (L_ * dims()); }
  /// Number of lattice points of the second factor alone.
  std::size_t second_factor_size() const { return std::size_t{1} << (L_ * m_); }
  double spacing() const;
  /// spacing^(n+m): the measure carried by one sample.
  double cell_volume() const;

  Coords coords(std::size_t flat) const;
  std::size_t flat(const Coords& c) const;
  /// Signed frequency of FFT bin `bin` along one axis, in [-side/2, side/2).
  std::int64_t frequency(std::int64_t bin) const;
  /// Flat index into the second-factor lattice from a full-grid flat index.
  std::size_t second_factor_index(std::size_t flat) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  friend Grid make_grid(int n, int m, int L);
  int n_ = 1;
  int m_ = 1;
  int L_ = kMinResolution;
};

/// Validated grid construction; throws ConfigError when n, m or L is out of
/// range or the sample count would not fit in memory.
Grid make_grid(int n, int m, int L);

/// Complex samples of a function on a Grid, stored row-major with axis 0
/// slowest. Immutable once built; every value is finite.
class SampledFunction {
 public:
  explicit SampledFunction(const Grid& grid);
  SampledFunction(const Grid& grid, std::vector<cplx> values);

  const Grid& grid() const { return grid_; }
  std::span<const cplx> values() const { return values_; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  /// Moves the sample vector out; the function is left empty.
  std::vector<cplx> release() && { return std::move(values_); }

 private:
  Grid grid_;
  std::vector<cplx> values_;
};

SampledFunction operator+(const SampledFunction& a, const SampledFunction& b);
SampledFunction operator-(const SampledFunction& a, const SampledFunction& b);
SampledFunction operator*(cplx c, const SampledFunction& a);

/// Dyadic rectangle R = I x J at scale (j, k) with offset N. Side of I is
/// 2^{-j-N}; side of J is 2^{-min(j,k)-N}. Anchors are lower-left corners.
struct DyadicRectangle {
  int j = 0;
  int k = 0;
  int N = 1;
  Coords iIdx{};
  Coords jIdx{};

  int first_exponent() const { return j + N; }
  int second_exponent() const { return (j < k ? j : k) + N; }
  friend bool operator==(const DyadicRectangle&, const DyadicRectangle&) = default;
};

/// Sampling layout shared by all rectangles of one scale pair.
struct ScaleGeometry {
  int firstExponent = 0;   // side(I) = 2^-firstExponent
  int secondExponent = 0;  // side(J) = 2^-secondExponent
  std::size_t firstStride = 0;   // grid samples per side of I
  std::size_t secondStride = 0;  // grid samples per side of J
  std::size_t anchorCount = 0;   // rectangles tiling the torus
  std::size_t samplesPerRectangle = 0;
  double measure = 0;  // |I||J|
};

/// Throws ResolutionError naming the scale when a rectangle side would be
/// finer than the grid spacing.
ScaleGeometry scale_geometry(const Grid& grid, int j, int k, int N);

/// Anchor-lattice flat index of the rectangle containing grid point `flat`.
std::size_t anchor_index(const Grid& grid, const ScaleGeometry& geom, std::size_t flat);
/// Grid flat index of the anchor (lower-left corner) of rectangle `anchor`.
std::size_t anchor_to_grid(const Grid& grid, const ScaleGeometry& geom, std::size_t anchor);
DyadicRectangle rectangle_at(const Grid& grid, const ScaleGeometry& geom, int j, int k, int N,
                             std::size_t anchor);
std::size_t rectangle_anchor(const Grid& grid, const ScaleGeometry& geom, const DyadicRectangle& r);

std::vector<DyadicRectangle> enumerate_rectangles(const Grid& grid, int j, int k, int N);

/// (sum |f|^p spacing^{n+m})^{1/p}; throws DomainError for p <= 0.
double lp_norm(const SampledFunction& f, double p);
double lp_norm(std::span<const double> values, const Grid& grid, double p);

/// Pairwise summation accumulated in long double.
long double pairwise_sum(std::span<const double> values);

}  // namespace flaglp
