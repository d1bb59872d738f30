#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "flaglp/carleson.hpp"
#include "flaglp/error.hpp"
#include "oracles.hpp"

using namespace flaglp;

namespace {

CoefficientField random_sparse(const CoefficientField& shape, std::uint64_t seed, double density) {
  CoefficientField out = shape;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pick(0.0, 1.0);
  for (auto& slot : out.slots()) {
    for (auto& v : slot.values) v = pick(rng) < density ? cplx(u(rng), u(rng)) : cplx(0.0);
  }
  return out;
}

OpenSetApprox single(const Grid& g, const ScaleSlot& slot, int N, std::size_t r) {
  return OpenSetApprox::from_rectangles(g, {rectangle_at(g, slot.geometry, slot.j, slot.k, N, r)});
}

}  // namespace

TEST_SUITE("carleson") {
  TEST_CASE("open set measure and containment") {
    const Grid g = make_grid(1, 1, 4);
    const auto rects = enumerate_rectangles(g, 0, 1, 1);
    const OpenSetApprox a = OpenSetApprox::from_rectangles(g, {rects[0], rects[1], rects[0]});
    CHECK(a.measure() == 0.5);
    CHECK(a.cell_count() == 128);
    CHECK(a.contains(rects[0]));
    CHECK_FALSE(a.contains(rects[2]));
    for (const auto& r : enumerate_rectangles(g, 2, 2, 1)) {
      const ScaleGeometry geom = scale_geometry(g, 2, 2, 1);
      bool inside = true;
      for (std::size_t x = 0; x < g.size(); ++x) {
        if (oracle::rectangle_contains(g, geom, rectangle_anchor(g, geom, r), x)) inside = inside && a.mask()[x];
      }
      REQUIRE(a.contains(r) == inside);
    }
    CHECK_THROWS_AS(OpenSetApprox::from_mask(g, std::vector<char>(g.size(), 0), 1), ConfigError);
  }

  TEST_CASE("mask decomposition covers the mask exactly") {
    const Grid g = make_grid(1, 1, 5);
    std::mt19937_64 rng(3);
    std::vector<char> mask(g.size());
    for (auto& m : mask) m = static_cast<char>(rng() % 3 == 0);
    const auto rects = decompose_mask(g, mask, 1);
    const OpenSetApprox o = OpenSetApprox::from_rectangles(g, rects);
    CHECK(std::vector<char>(o.mask().begin(), o.mask().end()) == mask);
    for (const auto& r : rects) CHECK(r.j == r.k);
  }

  TEST_CASE("sequence norm examples") {
    const Grid g = make_grid(1, 1, 6);
    CoefficientField s(g, 2, {0, 3}, {0, 3});
    CHECK(sp_norm(s, 1.0) == 0.0);
    ScaleSlot& slot = s.slot(2, 1);
    // The |R|^{-1} weight and the measure of R cancel at p = 2.
    slot.values[7] = 1.0;
    CHECK(sp_norm(s, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
    slot.values[7] = std::sqrt(slot.geometry.measure);
    CHECK(sp_norm(s, 2.0) == doctest::Approx(std::sqrt(slot.geometry.measure)).epsilon(1e-14));
    const auto candidates = std::vector<OpenSetApprox>{single(g, slot, 2, 7)};
    CoefficientField t(g, 2, {0, 3}, {0, 3});
    CHECK(cp_norm(t, 1.0, candidates) == 0.0);
    t.slot(2, 1).values[7] = 1.0;
    CHECK(cp_norm(t, 1.0, candidates) == doctest::Approx(1.0 / std::sqrt(slot.geometry.measure)).epsilon(1e-14));
    CHECK_THROWS_AS(cp_norm(t, 1.0, std::vector<OpenSetApprox>{}), ConfigError);
    CHECK_THROWS_AS(cp_norm(t, 1.5, candidates), DomainError);
  }

  TEST_CASE("s^p norm against dense evaluation on 64x64") {
    const Grid g = make_grid(1, 1, 6);
    const CoefficientField shape(g, 2, {0, 3}, {0, 3});
    for (std::uint64_t seed : {1u, 2u}) {
      const CoefficientField s = random_sparse(shape, seed, 0.05);
      for (double p : {0.5, 1.0, 2.0}) {
        const double expected = oracle::dense_sp_norm(s, p);
        CHECK(std::abs(sp_norm(s, p) - expected) <= 1e-10 * expected);
      }
      const double base = sp_norm(s, 1.0);
      CoefficientField scaled = s;
      for (auto& slot : scaled.slots()) for (auto& v : slot.values) v *= cplx(0.0, -3.0);
      CHECK(sp_norm(scaled, 1.0) == doctest::Approx(3 * base).epsilon(1e-12));
    }
  }

  TEST_CASE("c^p norm is monotone in the candidate family") {
    const Grid g = make_grid(1, 1, 5);
    const CoefficientField t = random_sparse(CoefficientField(g, 1, {0, 2}, {0, 2}), 5, 0.2);
    const auto candidates = generate_candidates(t, 32);
    REQUIRE(candidates.size() > 4);
    double previous = 0;
    for (std::size_t n = 1; n <= candidates.size(); ++n) {
      const double v = cp_norm(t, 1.0, std::span(candidates).first(n));
      CHECK(v >= previous);
      previous = v;
    }
    for (const auto& c : candidates) CHECK(c.measure() > 0);
    CHECK(candidates.size() <= 32);
    CHECK(generate_candidates(t, 32).size() == candidates.size());
  }

  TEST_CASE("budget one picks the densest rectangle") {
    const Grid g = make_grid(1, 1, 5);
    const CoefficientField t = random_sparse(CoefficientField(g, 1, {0, 2}, {0, 2}), 6, 0.3);
    double best = -1;
    std::vector<char> bestMask;
    for (const auto& slot : t.slots()) {
      for (std::size_t r = 0; r < slot.values.size(); ++r) {
        const double density = std::norm(slot.values[r]) / slot.geometry.measure;
        if (density > best) {
          best = density;
          const OpenSetApprox o = single(g, slot, 1, r);
          bestMask.assign(o.mask().begin(), o.mask().end());
        }
      }
    }
    const auto one = generate_candidates(t, 1);
    REQUIRE(one.size() == 1);
    CHECK(std::vector<char>(one[0].mask().begin(), one[0].mask().end()) == bestMask);
    CHECK_THROWS_AS(generate_candidates(t, 0), ConfigError);
  }

  TEST_CASE("one-hot sequences attain the exhaustive supremum on 8x8") {
    const Grid g = make_grid(1, 1, 3);
    const CoefficientField shape(g, 1, {0, 1}, {0, 1});
    int checked = 0;
    for (std::size_t s = 0; s < shape.slots().size(); ++s) {
      for (std::size_t r = 0; r < shape.slots()[s].values.size(); ++r) {
        CoefficientField t = shape;
        t.slots()[s].values[r] = 1.0;
        const double exhaustive = oracle::exhaustive_cp_norm(t, 1.0);
        CHECK(cp_norm(t, 1.0, generate_candidates(t, 64)) == exhaustive);
        ++checked;
      }
    }
    CHECK(checked == 32);
  }

  TEST_CASE("CMO norm") {
    const Grid g = make_grid(1, 1, 3);
    const FilterBank bank = build_filter_bank(g, oracle::tiny_profile(), 1);
    const auto rects = enumerate_rectangles(g, 0, 0, 1);
    const std::vector<OpenSetApprox> candidates{OpenSetApprox::from_rectangles(g, {rects[0]}),
                                                OpenSetApprox::from_rectangles(g, {rects[0], rects[3]})};
    CHECK(cmo_norm(SampledFunction(g), bank, 1.0, 1, candidates) == 0.0);

    // Constant modulus, Fourier mass at one frequency.
    const SampledFunction f = oracle::sample(g, [](auto x) { return std::polar(1.0, 2 * std::numbers::pi * (x[0] + 2 * x[1])); });
    for (double p : {0.5, 1.0}) {
      double expected = 0;
      for (const auto& omega : candidates) {
        double energy = 0;
        for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
          for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) {
            const auto lift = lift_flag_filter(bank, j, k);
            const auto conv = oracle::dense_convolution(g, oracle::inverse_dft(g, {lift.begin(), lift.end()}), f.values());
            const ScaleGeometry geom = scale_geometry(g, j, k, 1);
            for (std::size_t r = 0; r < geom.anchorCount; ++r) {
              if (!omega.contains(geom, r)) continue;
              for (std::size_t x = 0; x < g.size(); ++x) {
                if (oracle::rectangle_contains(g, geom, r, x)) energy += std::norm(conv[x]) * g.cell_volume();
              }
            }
          }
        }
        expected = std::max(expected, std::sqrt(std::pow(omega.measure(), 1 - 2 / p) * energy));
      }
      CHECK(expected > 0.01);
      CHECK(std::abs(cmo_norm(f, bank, p, 1, candidates) - expected) <= 1e-10);
      CHECK(cmo_norm(cplx(0, 2) * f, bank, p, 1, candidates) == doctest::Approx(2 * expected).epsilon(1e-12));
    }
  }

  TEST_CASE("duality pairing") {
    const Grid g = make_grid(1, 1, 5);
    const CoefficientField shape(g, 1, {0, 2}, {0, 2});
    CoefficientField s = random_sparse(shape, 1, 0.5);
    for (auto& slot : s.slots()) for (auto& v : slot.values) v = v.real();
    const cplx self = duality_pair(s, s);
    CHECK(self.real() > 0);
    CHECK(self.imag() == 0.0);
    CoefficientField a = shape, b = shape;
    a.slot(0, 0).values[0] = 1.0;
    b.slot(0, 0).values[1] = 1.0;
    b.slot(1, 2).values[0] = cplx(0, 1);
    CHECK(duality_pair(a, b) == 0.0);
    const CoefficientField t = random_sparse(shape, 2, 0.5);
    CHECK(std::abs(duality_pair(s, t) - std::conj(duality_pair(t, s))) <= 1e-14);
    CHECK_THROWS_AS(duality_pair(s, CoefficientField(g, 1, {0, 1}, {0, 2})), ShapeError);
  }

  TEST_CASE("candidate JSON round trip") {
    const Grid g = make_grid(1, 1, 5);
    const CoefficientField t = random_sparse(CoefficientField(g, 1, {0, 2}, {0, 2}), 7, 0.3);
    const auto candidates = generate_candidates(t, 16);
    const auto back = candidates_from_json(g, candidates_to_json(candidates));
    REQUIRE(back.size() == candidates.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(std::vector<char>(back[i].mask().begin(), back[i].mask().end()) ==
            std::vector<char>(candidates[i].mask().begin(), candidates[i].mask().end()));
    }
    CHECK_THROWS_AS(candidates_from_json(g, "{not json"), ConfigError);
    CHECK_THROWS_AS(candidates_from_json(g, "{}"), ConfigError);
  }
}
