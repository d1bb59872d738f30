#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "flaglp/corpus.hpp"
#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/transform.hpp"
#include "oracles.hpp"

using namespace flaglp;

namespace {

// int_c^{c+len} exp(-2 pi i q u) du
cplx interval_transform(double q, double c, double len) {
  if (q == 0) return len;
  const double w = 2 * std::numbers::pi * q;
  return (std::polar(1.0, -w * (c + len)) - std::polar(1.0, -w * c)) / cplx(0, -w);
}

SampledFunction translate(const SampledFunction& f, const Coords& shift) {
  const Grid& g = f.grid();
  const auto side = static_cast<std::int64_t>(g.side());
  std::vector<cplx> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Coords c = g.coords(i);
    for (int a = 0; a < g.dims(); ++a) c[a] = (c[a] + shift[a]) % side;
    v[g.flat(c)] = f[i];
  }
  return SampledFunction(g, std::move(v));
}

}  // namespace

TEST_SUITE("transform") {
  TEST_CASE("slot shapes follow the rectangle tiling") {
    const Grid g = make_grid(1, 1, 8);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const CoefficientField c = empty_field(bank, 2);
    CHECK(c.slot(1, 3).values.size() == 64);
    CHECK(c.slot(3, 1).values.size() == 256);
    CHECK(c.slot(0, 0).values.size() == 16);
    std::size_t total = 0;
    for (const auto& s : c.slots()) total += s.values.size();
    CHECK(total == c.rectangle_count());
    CHECK(c.low_pass().size() == g.size());
    CHECK_THROWS_AS(c.slot(6, 0), RangeError);
  }

  TEST_CASE("zero input gives zero coefficients") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const CoefficientField c = analyze(SampledFunction(g), bank, 2);
    for (const auto& s : c.slots()) for (const cplx& v : s.values) REQUIRE(v == 0.0);
    const SampledFunction back = synthesize_discrete(c, bank);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back[i] == 0.0);
  }

  TEST_CASE("single frequency excites only neighbouring scales") {
    const Grid g = make_grid(1, 1, 8);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const std::int64_t q0[2] = {5, 3};
    const SampledFunction f = oracle::sample(g, [&](auto x) {
      return std::polar(1.0, 2 * std::numbers::pi * (q0[0] * x[0] + q0[1] * x[1]));
    });
    const std::size_t bin = g.flat(Coords{q0[0], q0[1]});
    // Annulus of the first factor holding the frequency.
    const double radius = 2 * std::numbers::pi * std::hypot(5.0, 3.0);
    int j0 = -1;
    for (int j = 0; j <= 5; ++j) {
      if (radius >= 0.5 * std::ldexp(1.0, j) && radius < 2 * std::ldexp(1.0, j) && bank.psi1_hat(j)[bin] > 0.5) j0 = j;
    }
    REQUIRE(j0 >= 0);
    const CoefficientField c = analyze(f, bank, 2);
    int live = 0;
    for (const auto& s : c.slots()) {
      double peak = 0;
      for (const cplx& v : s.values) peak = std::max(peak, std::abs(v));
      const double expected = lift_flag_filter(bank, s.j, s.k)[bin];
      CHECK(peak == doctest::Approx(std::abs(expected)).epsilon(1e-10).scale(1.0));
      if (peak > 1e-12) {
        ++live;
        CHECK(std::abs(s.j - j0) <= 1);
      }
    }
    CHECK(live > 0);
  }

  TEST_CASE("analysis matches dense convolution on 8x8") {
    const Grid g = make_grid(1, 1, 3);
    const FilterBank bank = build_filter_bank(g, oracle::tiny_profile(), 1);
    const SampledFunction f = oracle::random_function(g, 17);
    const CoefficientField c = analyze(f, bank, 1);
    double worst = 0, scale = 0;
    for (const auto& s : c.slots()) {
      const auto lift = lift_flag_filter(bank, s.j, s.k);
      const auto h = oracle::inverse_dft(g, {lift.begin(), lift.end()});
      const auto conv = oracle::dense_convolution(g, h, f.values());
      for (std::size_t r = 0; r < s.values.size(); ++r) {
        worst = std::max(worst, std::abs(s.values[r] - conv[anchor_to_grid(g, s.geometry, r)]));
        scale = std::max(scale, std::abs(conv[anchor_to_grid(g, s.geometry, r)]));
      }
      const auto full = channel_convolution(f, bank, s.j, s.k);
      CHECK(oracle::max_abs_diff(full, conv) <= 1e-9);
    }
    CHECK(scale > 1e-3);
    CHECK(worst <= 1e-9);
    const auto lpOracle = oracle::dense_convolution(
        g, oracle::inverse_dft(g, {bank.low_pass_hat().begin(), bank.low_pass_hat().end()}), f.values());
    CHECK(oracle::max_abs_diff(c.low_pass(), lpOracle) <= 1e-9);
  }

  TEST_CASE("analysis commutes with translation by a coarse cell") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const SampledFunction f = oracle::random_function(g, 5);
    const std::int64_t step = static_cast<std::int64_t>(g.side() / 4);
    const CoefficientField a = analyze(f, bank, 2);
    const CoefficientField b = analyze(translate(f, Coords{step, 2 * step}), bank, 2);
    for (std::size_t s = 0; s < a.slots().size(); ++s) {
      const ScaleSlot& sa = a.slots()[s];
      const ScaleSlot& sb = b.slots()[s];
      const auto side = static_cast<std::int64_t>(g.side());
      for (std::size_t r = 0; r < sa.values.size(); ++r) {
        Coords c = g.coords(anchor_to_grid(g, sa.geometry, r));
        c[0] = (c[0] + step) % side;
        c[1] = (c[1] + 2 * step) % side;
        const std::size_t moved = anchor_index(g, sa.geometry, g.flat(c));
        REQUIRE(std::abs(sb.values[moved] - sa.values[r]) <= 1e-12);
      }
    }
  }

  TEST_CASE("continuous reproducing formula") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const SampledFunction f = oracle::random_function(g, 11);
    CHECK(oracle::relative_l2(synthesize_continuous(f, bank), f) <= 1e-9);
    const SampledFunction h = oracle::random_function(g, 12);
    const SampledFunction lhs = synthesize_continuous(f + h, bank);
    const SampledFunction rhs = synthesize_continuous(f, bank) + synthesize_continuous(h, bank);
    CHECK(oracle::relative_l2(lhs, rhs) <= 1e-12);

    const SampledFunction constant = oracle::sample(g, [](auto) { return cplx(2.5, -1.0); });
    const CoefficientField c = analyze(constant, bank, 2);
    for (const auto& s : c.slots()) for (const cplx& v : s.values) REQUIRE(std::abs(v) <= 1e-12);
    for (const cplx& v : c.low_pass()) REQUIRE(std::abs(v - cplx(2.5, -1.0)) <= 1e-12);
    CHECK(oracle::relative_l2(synthesize_continuous(constant, bank), constant) <= 1e-12);
  }

  TEST_CASE("remainder shrinks as N grows") {
    const Grid g = make_grid(1, 1, 8);
    const FilterBank base = build_filter_bank(g, FilterProfile{}, 2);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const SampledFunction f = band_limited_field(base, seed);
      double previous = 0;
      for (int N = 2; N <= 3; ++N) {
        const FilterBank bank = build_filter_bank(g, FilterProfile{}, N);
        const double r = lp_norm(remainder_apply(f, bank, N), 2) / lp_norm(f, 2);
        if (N == 3) CHECK(previous / r >= 1.5);
        previous = r;
      }
    }
  }

  TEST_CASE("remainder is linear and kills zero") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const SampledFunction zero = remainder_apply(SampledFunction(g), bank, 2);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(zero[i] == 0.0);
    const SampledFunction f = oracle::random_function(g, 1);
    const SampledFunction h = oracle::random_function(g, 2);
    const cplx a(0.7, -0.2), b(-1.3, 0.4);
    const SampledFunction lhs = remainder_apply(a * f + b * h, bank, 2);
    const SampledFunction rhs = a * remainder_apply(f, bank, 2) + b * remainder_apply(h, bank, 2);
    CHECK(oracle::max_abs_diff(lhs.values(), rhs.values()) <= 1e-12 * lp_norm(rhs, 2) + 1e-15);
    const SampledFunction t = apply_tn(f, bank, 2);
    CHECK(oracle::relative_l2(t + remainder_apply(f, bank, 2), f) <= 1e-12);
  }

  TEST_CASE("adjoint of T_N") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const SampledFunction f = oracle::random_function(g, 21);
    const SampledFunction h = oracle::random_function(g, 22);
    const SampledFunction tf = apply_tn(f, bank, 2);
    const SampledFunction th = apply_tn_adjoint(h, bank, 2);
    cplx lhs{}, rhs{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      lhs += tf[i] * std::conj(h[i]);
      rhs += f[i] * std::conj(th[i]);
    }
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }

  TEST_CASE("Neumann inverse") {
    const Grid g = make_grid(1, 1, 7);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 3);
    const NeumannResult zero = neumann_inverse(SampledFunction(g), bank, 3);
    CHECK(zero.iterations <= 1);
    CHECK(lp_norm(zero.g, 2) == 0.0);

    const SampledFunction f = oracle::random_function(g, 8);
    const NeumannResult r = neumann_inverse(f, bank, 3, 1e-10);
    CHECK(oracle::relative_l2(apply_tn(r.g, bank, 3), f) <= 1e-10);
    CHECK(r.relativeResidual <= 1e-10);
    const double rho = remainder_norm_estimate(bank, 3);
    CHECK(rho < 1);
    CHECK(r.probeContraction <= rho * (1 + 1e-6));
    const int predicted = static_cast<int>(std::ceil(std::log(1e-10) / std::log(rho))) + 1;
    CHECK(r.iterations <= predicted + 1);

    CHECK_THROWS_AS(neumann_inverse(f, bank, 3, 1e-14, 1), ConvergenceError);
    CHECK_THROWS_AS(neumann_inverse(f, bank, 3, 0.0), DomainError);
    CHECK_THROWS_AS(neumann_inverse(f, build_filter_bank(make_grid(1, 1, 6), FilterProfile{}, 2), 2), ShapeError);
  }

  TEST_CASE("remainder norm estimate is deterministic") {
    const FilterBank bank = build_filter_bank(make_grid(1, 1, 6), FilterProfile{}, 2);
    CHECK(remainder_norm_estimate(bank, 2) == remainder_norm_estimate(bank, 2));
  }

  TEST_CASE("discrete round trip on 128x128") {
    const Grid g = make_grid(1, 1, 7);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 3);
    for (std::uint64_t seed : {1u, 2u}) {
      const SampledFunction f = oracle::random_function(g, seed);
      const NeumannResult inv = neumann_inverse(f, bank, 3, 1e-8);
      const SampledFunction back = synthesize_discrete(analyze(inv.g, bank, 3), bank);
      CHECK(oracle::relative_l2(back, f) <= 1e-7);
    }
  }

  TEST_CASE("single coefficient synthesizes one cell-integrated filter") {
    const Grid g = make_grid(1, 1, 5);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const int j = 2, k = 2;
    REQUIRE_FALSE(bank.channel_is_zero(j, k));
    CoefficientField c = empty_field(bank, 2);
    ScaleSlot& slot = c.slot(j, k);
    const std::size_t r = 3 % slot.values.size();
    slot.values[r] = 1.0;
    const SampledFunction out = synthesize_discrete(c, bank);

    const Coords corner = g.coords(anchor_to_grid(g, slot.geometry, r));
    const double h = g.spacing();
    const double len[2] = {static_cast<double>(slot.geometry.firstStride) * h,
                           static_cast<double>(slot.geometry.secondStride) * h};
    const auto lift = lift_flag_filter(bank, j, k);
    std::vector<cplx> H(g.size());
    for (std::size_t q = 0; q < g.size(); ++q) {
      const Coords cq = g.coords(q);
      cplx box = 1.0;
      for (int a = 0; a < 2; ++a) {
        box *= interval_transform(static_cast<double>(g.frequency(cq[a])), static_cast<double>(corner[a]) * h, len[a]);
      }
      H[q] = lift[q] * box * static_cast<double>(g.size());
    }
    const auto expected = oracle::inverse_dft(g, H);
    double peak = 0;
    for (const cplx& v : expected) peak = std::max(peak, std::abs(v));
    CHECK(peak > 1e-6);
    CHECK(oracle::max_abs_diff(out.values(), expected) <= 1e-12 * std::max(1.0, peak));
  }

  TEST_CASE("coefficient files round trip") {
    const Grid g = make_grid(1, 1, 6);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    const CoefficientField c = analyze(oracle::random_function(g, 4), bank, 2);
    const auto dir = std::filesystem::temp_directory_path() / "flaglp_coeffs";
    std::filesystem::remove_all(dir);
    save_coefficients(c, dir);
    const CoefficientField back = load_coefficients(dir);
    REQUIRE(back.same_shape(c));
    for (std::size_t s = 0; s < c.slots().size(); ++s) {
      for (std::size_t r = 0; r < c.slots()[s].values.size(); ++r) REQUIRE(back.slots()[s].values[r] == c.slots()[s].values[r]);
    }
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back.low_pass()[i] == c.low_pass()[i]);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_coefficients(dir), IoError);
  }

  TEST_CASE("shape errors") {
    const FilterBank bank = build_filter_bank(make_grid(1, 1, 6), FilterProfile{}, 2);
    const SampledFunction f = oracle::random_function(make_grid(1, 1, 5), 1);
    CHECK_THROWS_AS(analyze(f, bank, 2), ShapeError);
    CHECK_THROWS_AS(synthesize_continuous(f, bank), ShapeError);
    const FilterBank other = build_filter_bank(make_grid(1, 1, 7), FilterProfile{}, 2);
    CHECK_THROWS_AS(synthesize_discrete(empty_field(other, 2), bank), ShapeError);
  }
}
