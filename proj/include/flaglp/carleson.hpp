#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flaglp/filters.hpp"
#include "flaglp/transform.hpp"

namespace flaglp {

/// Finite union of dyadic rectangles standing in for an open set. The union
/// is kept canonically as a mask over grid cells, with a summed-area table
/// so rectangle containment is an O(2^dims) query.
class OpenSetApprox {
 public:
  static OpenSetApprox from_rectangles(const Grid& grid, std::vector<DyadicRectangle> rects);
  /// Throws ConfigError for an empty mask.
  static OpenSetApprox from_mask(const Grid& grid, std::vector<char> mask, int N);

  const Grid& grid() const { return grid_; }
  const std::vector<DyadicRectangle>& rectangles() const { return rects_; }
  std::span<const char> mask() const { return mask_; }
  double measure() const { return measure_; }
  std::size_t cell_count() const { return cells_; }

  bool contains(const ScaleGeometry& geom, std::size_t anchor) const;
  bool contains(const DyadicRectangle& r) const;

 private:
  OpenSetApprox(const Grid& grid, std::vector<DyadicRectangle> rects, std::vector<char> mask);
  std::uint32_t box_count(const Coords& lo, const Coords& extent) const;

  Grid grid_;
  std::vector<DyadicRectangle> rects_;
  std::vector<char> mask_;
  std::vector<std::uint32_t> table_;
  std::size_t cells_ = 0;
  double measure_ = 0;
};

/// Covers a cell mask by maximal dyadic cubes (j = k) at offset N.
std::vector<DyadicRectangle> decompose_mask(const Grid& grid, std::span<const char> mask, int N);

/// ||(sum_R |s_R|^2 |R|^{-1} chi_R)^{1/2}||_p.
double sp_norm(const CoefficientField& s, double p);

/// max over candidates of (|Omega|^{1-2/p} sum_{R in Omega} |t_R|^2)^{1/2}.
/// A lower bound for the supremum over all open sets.
double cp_norm(const CoefficientField& t, double p, std::span<const OpenSetApprox> candidates);

/// Per-rectangle Carleson energy (sum_{x in R} |psi_{j,k} * f(x)|^2 dx)^{1/2}.
CoefficientField carleson_energy_field(const SampledFunction& f, const FilterBank& bank, int N);

/// CMO^p_F Carleson norm of f maximized over the candidate family.
double cmo_norm(const SampledFunction& f, const FilterBank& bank, double p, int N,
                std::span<const OpenSetApprox> candidates);

/// sum_R s_R conj(t_R); throws ShapeError on mismatched fields.
cplx duality_pair(const CoefficientField& s, const CoefficientField& t);

/// Deterministic candidate family of at most `budget` sets: densest single
/// rectangles, level sets of the discrete square function on a geometric
/// ladder, and greedy unions grown from the densest seed.
std::vector<OpenSetApprox> generate_candidates(const CoefficientField& t, std::size_t budget);

std::string candidates_to_json(std::span<const OpenSetApprox> candidates);
std::vector<OpenSetApprox> candidates_from_json(const Grid& grid, const std::string& text);

}  // namespace flaglp
