#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "flaglp/error.hpp"
#include "flaglp/filters.hpp"
#include "flaglp/kernels.hpp"
#include "oracles.hpp"

using namespace flaglp;

namespace {

double bump(double r2) { return r2 < 1 ? std::exp(-1 / (1 - r2)) : 0.0; }

cplx at(const KernelSpec& k, double x, double y) {
  const double a[1] = {x}, b[1] = {y};
  return k.evaluate(a, b);
}

cplx at3(const KernelSpec& k, double x, double y, double z) {
  const double a[2] = {x, y}, b[1] = {z};
  return k.evaluate(a, b);
}

// Composite 20-point Gauss-Legendre over `panels` equal pieces of [lo, hi].
template <class F>
double composite(F&& f, double lo, double hi, int panels) {
  using boost::math::quadrature::gauss;
  double total = 0;
  const double w = (hi - lo) / panels;
  for (int i = 0; i < panels; ++i) total += gauss<double, 20>::integrate(f, lo + i * w, lo + (i + 1) * w);
  return total;
}

const ConstantCheck& find(const std::vector<ConstantCheck>& checks, const std::string& label) {
  for (const auto& c : checks) {
    if (c.label == label) return c;
  }
  FAIL("missing check " << label);
  return checks.front();
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("expression parser") {
    const double v[3] = {1.0, 2.0, 0.5};
    CHECK(Expression::parse("1/(x*(x+i*y))").evaluate(v) == 1.0 / cplx(1.0, 2.0));
    CHECK(Expression::parse("2^3^2").evaluate(v) == 512.0);
    CHECK(Expression::parse("-2^2").evaluate(v) == -4.0);
    CHECK(Expression::parse("1 + 2*3 - 4/8").evaluate(v) == 6.5);
    CHECK(std::abs(Expression::parse("sin(pi*z) + cos(0) + exp(log(y)) + sqrt(abs(-4))").evaluate(v) - 6.0) <= 1e-15);
    CHECK(Expression::parse("z*x").max_variable() == 2);
    CHECK(Expression::parse("3").max_variable() == -1);
    CHECK(Expression::parse("1.5e1").evaluate(v) == 15.0);
    for (const char* bad : {"", "1+", "(x", "x)", "foo(x)", "w", "x**y", "1 2"}) {
      CHECK_THROWS_AS(Expression::parse(bad), ConfigError);
    }
    CHECK_THROWS_AS(expression_kernel("x*y*z", SingularType::Flag, 1, 1), ConfigError);
    CHECK_THROWS_AS(expression_kernel("x", SingularType::Flag, 2, 2), ConfigError);
  }

  TEST_CASE("registry") {
    for (const auto& name : registry_names()) CHECK(registry_kernel(name).evaluate);
    CHECK_THROWS_AS(registry_kernel("nope"), ConfigError);
    const KernelSpec k2 = registry_kernel("k2-flag");
    CHECK(k2.type == SingularType::Flag);
    const KernelSpec parsed = expression_kernel("1/(x*(x+i*y))", SingularType::Flag, 1, 1);
    for (double x : {-0.7, 0.3, 2.0}) {
      for (double y : {-1.0, 0.0, 0.25}) CHECK(std::abs(at(k2, x, y) - at(parsed, x, y)) <= 1e-15 * std::abs(at(k2, x, y)));
    }
    const KernelSpec odd = registry_kernel("k2-odd");
    CHECK(std::abs(at(odd, 0.4, 0.3) - 0.5 * (at(k2, 0.4, 0.3) - at(k2, -0.4, 0.3))) <= 1e-14);
    CHECK(registry_kernel("k1-product").type == SingularType::Product);
  }

  TEST_CASE("bump family is normalized and supported in the unit ball") {
    for (int d : {1, 2}) {
      const auto family = bump_family(d, 7);
      CHECK(family.size() >= static_cast<std::size_t>(d + 3));
      const auto again = bump_family(d, 7);
      for (std::size_t b = 0; b < family.size(); ++b) {
        double peak = 0;
        for (int i = -30; i <= 30; ++i) {
          for (int j = -30; j <= 30; ++j) {
            const double p[2] = {i / 25.0, j / 25.0};
            const double v = family[b].value(std::span<const double>(p, static_cast<std::size_t>(d)));
            CHECK(v == again[b].value(std::span<const double>(p, static_cast<std::size_t>(d))));
            peak = std::max(peak, std::abs(v));
            if (p[0] * p[0] + (d == 2 ? p[1] * p[1] : 0) >= 1) REQUIRE(v == 0.0);
          }
        }
        CHECK(peak <= 1.0);
        CHECK(peak > 0.0);
      }
    }
  }

  TEST_CASE("zero kernel passes with vanishing constants") {
    for (SingularType t : {SingularType::Product, SingularType::Flag}) {
      const KernelSpec z = zero_kernel(t, 1, 1);
      const KernelReport r = t == SingularType::Flag ? validate_flag_kernel(z) : validate_product_kernel(z);
      CHECK(r.passed);
      for (const auto& c : r.size) for (double v : c.perRefinement) CHECK(v == 0.0);
      for (const auto& c : r.cancellation) for (double v : c.perRefinement) CHECK(v == 0.0);
    }
  }

  TEST_CASE("1/(xy) is a product kernel but not a flag kernel") {
    KernelSpec k1 = registry_kernel("k1-product");
    const KernelReport product = validate_product_kernel(k1);
    CHECK(product.passed);
    CHECK(product.sizePassed);
    k1.type = SingularType::Flag;
    const KernelReport flag = validate_flag_kernel(k1);
    CHECK_FALSE(flag.sizePassed);
    CHECK_FALSE(flag.passed);
    CHECK(flag.maxSpread >= 4);
    CHECK(flag.productSizePassed);
  }

  TEST_CASE("1/(x(x+iy)) size and single-parameter cancellation") {
    const KernelReport r = validate_flag_kernel(registry_kernel("k2-flag"));
    CHECK(r.sizePassed);
    CHECK(r.productSizePassed);
    for (const auto& c : r.size) CHECK(c.stable);
    CHECK(find(r.cancellation, "cancel-first ()").stable);
    CHECK(find(r.cancellation, "cancel-second ()").stable);
    CHECK(r.samplesPerRefinement > 0);
  }

  TEST_CASE("geometry mismatch is refused") {
    CHECK_THROWS_AS(validate_flag_kernel(registry_kernel("k1-product")), KernelError);
    CHECK_THROWS_AS(validate_product_kernel(registry_kernel("k2-flag")), KernelError);
  }

  TEST_CASE("projection of a compactly supported bump") {
    const KernelSpec sharp = registry_kernel("smooth-bump");
    const KernelSpec k = project_to_flag(sharp);
    CHECK(k.type == SingularType::Flag);
    for (double x : {0.0, 0.3, -0.6}) {
      for (double y : {0.0, 0.2, -0.9, 1.4}) {
        const double half = std::sqrt(1 - x * x);
        const double lo = std::max(-1.0, y - half), hi = std::min(1.0, y + half);
        const double expected =
            lo < hi ? composite([&](double z) { return bump(x * x + (y - z) * (y - z)) * bump(z * z); }, lo, hi, 256) : 0.0;
        const cplx got = at(k, x, y);
        CHECK(std::abs(got.real() - expected) <= 1e-8 * std::abs(expected) + 1e-13);
        CHECK(got.imag() == 0.0);
      }
    }
    const KernelSpec zero = project_to_flag(zero_kernel(SingularType::Product, 2, 1));
    CHECK(at(zero, 0.4, 0.1) == 0.0);
  }

  TEST_CASE("projection is linear") {
    const KernelSpec a = registry_kernel("smooth-bump");
    KernelSpec b = a;
    b.evaluate = [](std::span<const double> u, std::span<const double> v) {
      return cplx(u[0], 1.0) * bump((u[0] - 0.2) * (u[0] - 0.2) + u[1] * u[1]) * bump(v[0] * v[0] / 0.5);
    };
    const cplx ca(2.0, 0.0), cb(0.0, -0.5);
    KernelSpec sum = a;
    sum.evaluate = [&](std::span<const double> u, std::span<const double> v) {
      return ca * a.evaluate(u, v) + cb * b.evaluate(u, v);
    };
    const KernelSpec pa = project_to_flag(a), pb = project_to_flag(b), ps = project_to_flag(sum);
    for (double x : {0.1, -0.4}) {
      for (double y : {0.0, 0.5, -0.3}) {
        const cplx lhs = at(ps, x, y);
        const cplx rhs = ca * at(pa, x, y) + cb * at(pb, x, y);
        CHECK(std::abs(lhs - rhs) <= 2e-8 * (std::abs(ca * at(pa, x, y)) + std::abs(cb * at(pb, x, y))) + 1e-13);
      }
    }
  }

  TEST_CASE("torus projection reproduces the lifted filter") {
    const Grid g = make_grid(1, 1, 3);
    const FilterBank bank = build_filter_bank(g, oracle::tiny_profile(), 1);
    const double M = static_cast<double>(g.side());
    for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
      for (int kk = bank.k_range().lo; kk <= bank.k_range().hi; ++kk) {
        const auto h1 = bank.psi1_hat(j);
        const auto h2 = bank.psi2_hat(kk);
        KernelSpec sharp;
        sharp.name = "psi-sharp";
        sharp.type = SingularType::Product;
        sharp.firstDim = 2;
        sharp.secondDim = 1;
        sharp.evaluate = [&](std::span<const double> u, std::span<const double> v) {
          cplx first{}, second{};
          for (std::size_t q = 0; q < g.size(); ++q) {
            if (h1[q] == 0) continue;
            const Coords c = g.coords(q);
            const double t = 2 * std::numbers::pi * (g.frequency(c[0]) * u[0] + g.frequency(c[1]) * u[1]);
            first += h1[q] * std::polar(1.0, t);
          }
          for (std::size_t q = 0; q < g.side(); ++q) {
            if (h2[q] == 0) continue;
            second += h2[q] * std::polar(1.0, 2 * std::numbers::pi * g.frequency(static_cast<std::int64_t>(q)) * v[0]);
          }
          return first / (M * M) * second;
        };
        const KernelSpec k = project_to_flag(sharp, ProjectionOptions{ProjectionDomain::Torus});
        const auto lift = lift_flag_filter(bank, j, kk);
        const auto expected = oracle::inverse_dft(g, {lift.begin(), lift.end()});
        double worst = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const Coords c = g.coords(i);
          worst = std::max(worst, std::abs(at(k, c[0] * g.spacing(), c[1] * g.spacing()) - expected[i]));
        }
        CHECK(worst <= 1e-8);
      }
    }
  }

  TEST_CASE("projection errors") {
    CHECK_THROWS_AS(project_to_flag(registry_kernel("k2-flag")), KernelError);
    KernelSpec wide = registry_kernel("smooth-bump");
    wide.firstDim = 1;
    wide.secondDim = 2;
    CHECK_THROWS_AS(project_to_flag(wide), ConfigError);
    KernelSpec divergent = registry_kernel("smooth-bump");
    divergent.evaluate = [](std::span<const double> u, std::span<const double> v) {
      return cplx(bump(u[0] * u[0] + u[1] * u[1]) / std::abs(v[0]));
    };
    CHECK_THROWS_AS(at(project_to_flag(divergent), 0.1, 0.3), IntegrationError);
  }

  TEST_CASE("truncated convolution of the zero kernel") {
    const Grid g = make_grid(1, 1, 5);
    const FlagConvolution r = flag_convolve(oracle::random_function(g, 1), zero_kernel(SingularType::Flag, 1, 1), g.spacing());
    CHECK(r.operatorNorm == 0.0);
    CHECK(lp_norm(r.output, 2) == 0.0);
  }

  TEST_CASE("truncated convolution against direct summation") {
    const Grid g = make_grid(1, 1, 5);
    const KernelSpec k = registry_kernel("k2-odd");
    const double eps = 2 * g.spacing();
    const SampledFunction f = oracle::random_function(g, 4);
    const FlagConvolution r = flag_convolve(f, k, eps);
    std::vector<cplx> h(g.size());
    const auto side = static_cast<std::int64_t>(g.side());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Coords c = g.coords(i);
      const double x = static_cast<double>(c[0] < side / 2 ? c[0] : c[0] - side) * g.spacing();
      const double y = static_cast<double>(c[1] < side / 2 ? c[1] : c[1] - side) * g.spacing();
      if (std::abs(x) > eps * (1 + 1e-12)) h[i] = at(k, x, y) * g.cell_volume();
    }
    const auto expected = oracle::dense_convolution(g, h, f.values());
    double scale = 0;
    for (const auto& v : expected) scale = std::max(scale, std::abs(v));
    CHECK(oracle::max_abs_diff(r.output.values(), expected) <= 1e-12 * scale);
    // The exact L2 norm of a convolution is the peak of its multiplier.
    std::vector<cplx> spectrum(g.size());
    double peak = 0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      const Coords cq = g.coords(q);
      cplx acc{};
      for (std::size_t x = 0; x < g.size(); ++x) {
        const Coords cx = g.coords(x);
        acc += h[x] * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(cq[0] * cx[0] + cq[1] * cx[1]) / static_cast<double>(side));
      }
      peak = std::max(peak, std::abs(acc));
    }
    CHECK(r.operatorNorm == doctest::Approx(peak).epsilon(1e-12));
  }

  TEST_CASE("unit-mass bump acts like an approximate identity") {
    const Grid g = make_grid(1, 1, 8);
    const double radius = 0.125;
    double mass = 0;
    const auto side = static_cast<std::int64_t>(g.side());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Coords c = g.coords(i);
      const double x = static_cast<double>(c[0] < side / 2 ? c[0] : c[0] - side) * g.spacing();
      const double y = static_cast<double>(c[1] < side / 2 ? c[1] : c[1] - side) * g.spacing();
      mass += bump((x * x + y * y) / (radius * radius)) * g.cell_volume();
    }
    KernelSpec k = zero_kernel(SingularType::Flag, 1, 1);
    k.name = "unit-bump";
    k.evaluate = [=](std::span<const double> x, std::span<const double> y) {
      return cplx(bump((x[0] * x[0] + y[0] * y[0]) / (radius * radius)) / mass);
    };
    const SampledFunction f = oracle::sample(g, [](auto p) {
      return cplx(std::cos(2 * std::numbers::pi * p[0]) * std::cos(2 * std::numbers::pi * p[1]));
    });
    const FlagConvolution r = flag_convolve(f, k, g.spacing());
    const double ratio = lp_norm(r.output, 2) / lp_norm(f, 2);
    CHECK(ratio > 0.8);
    CHECK(ratio <= 1.0);
    CHECK(r.operatorNorm <= 1.0 + 1e-12);
    CHECK(r.operatorNorm > 0.9);
  }

  TEST_CASE("majorant constant is stable across resolutions") {
    const KernelSpec k = project_to_flag(registry_kernel("smooth-bump"));
    double c[2];
    for (int i = 0; i < 2; ++i) {
      const Grid g = make_grid(1, 1, 5 + i);
      const SampledFunction f = oracle::sample(g, [](auto p) {
        return cplx(bump(((p[0] - 0.5) * (p[0] - 0.5) + (p[1] - 0.5) * (p[1] - 0.5)) / 0.1));
      });
      c[i] = flag_convolve(f, k, g.spacing(), true).majorantConstant;
      CHECK(c[i] > 0);
    }
    CHECK(std::max(c[0], c[1]) <= 1.5 * std::min(c[0], c[1]));
  }

  TEST_CASE("truncated convolution errors") {
    const Grid g = make_grid(1, 1, 5);
    const SampledFunction f = oracle::random_function(g, 1);
    CHECK_THROWS_AS(flag_convolve(f, registry_kernel("k2-odd"), 0.5 * g.spacing()), TruncationError);
    CHECK_THROWS_AS(flag_convolve(f, registry_kernel("k1-product"), g.spacing()), KernelError);
    CHECK_THROWS_AS(flag_convolve(oracle::random_function(make_grid(2, 1, 3), 1), registry_kernel("k2-odd"), 0.2),
                    ShapeError);
  }
}
