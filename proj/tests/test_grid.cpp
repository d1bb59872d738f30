#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "flaglp/error.hpp"
#include "flaglp/grid.hpp"
#include "flaglp/io.hpp"
#include "oracles.hpp"

using namespace flaglp;

TEST_SUITE("grid") {
  TEST_CASE("make_grid sizes and spacing") {
    const Grid a = make_grid(1, 1, 8);
    CHECK(a.side() == 256);
    CHECK(a.size() == 256u * 256u);
    CHECK(a.spacing() == std::ldexp(1.0, -8));
    CHECK(make_grid(1, 1, 3).size() == 64);
    const Grid c = make_grid(2, 1, 6);
    CHECK(c.size() == 64u * 64u * 64u);
    CHECK(c.dims() == 3);
    CHECK(c.second_factor_size() == 64);
  }

  TEST_CASE("make_grid rejects out of range parameters") {
    CHECK_THROWS_AS(make_grid(0, 1, 8), ConfigError);
    CHECK_THROWS_AS(make_grid(1, 4, 8), ConfigError);
    CHECK_THROWS_AS(make_grid(1, 1, 2), ConfigError);
    CHECK_THROWS_AS(make_grid(1, 1, 15), ConfigError);
    CHECK_THROWS_AS(make_grid(3, 3, 14), ConfigError);
  }

  TEST_CASE("coords and flat are inverse, axis 0 slowest") {
    const Grid g = make_grid(2, 1, 3);
    CHECK(g.flat(g.coords(0)) == 0);
    const Coords c = g.coords(1);
    CHECK(c[2] == 1);
    CHECK(c[0] == 0);
    for (std::size_t i = 0; i < g.size(); i += 37) CHECK(g.flat(g.coords(i)) == i);
    CHECK(g.frequency(3) == 3);
    CHECK(g.frequency(4) == -4);
    CHECK(g.frequency(7) == -1);
  }

  TEST_CASE("rectangle counts") {
    const Grid g = make_grid(1, 1, 8);
    CHECK(enumerate_rectangles(g, 0, 0, 2).size() == 16);
    const ScaleGeometry a = scale_geometry(g, 0, 0, 2);
    CHECK(a.measure == 1.0 / 16);
    const ScaleGeometry b = scale_geometry(g, 1, 3, 2);
    CHECK(b.firstExponent == 3);
    CHECK(b.secondExponent == 3);
    CHECK(b.anchorCount == 64);
    const ScaleGeometry c = scale_geometry(g, 3, 1, 2);
    CHECK(c.firstExponent == 5);
    CHECK(c.secondExponent == 3);
    CHECK(c.anchorCount == 32 * 8);
    CHECK(enumerate_rectangles(g, 3, 1, 2).size() == 256);
  }

  TEST_CASE("rectangles tile the torus") {
    const Grid g = make_grid(1, 1, 6);
    for (int j = 0; j <= 3; ++j) {
      for (int k = 0; k <= 3; ++k) {
        const ScaleGeometry geom = scale_geometry(g, j, k, 2);
        std::vector<int> hits(g.size(), 0);
        for (std::size_t r = 0; r < geom.anchorCount; ++r) {
          for (std::size_t x = 0; x < g.size(); ++x) hits[x] += oracle::rectangle_contains(g, geom, r, x);
        }
        for (int h : hits) REQUIRE(h == 1);
        CHECK(geom.measure * static_cast<double>(geom.anchorCount) == 1.0);
        for (std::size_t x = 0; x < g.size(); x += 11) {
          CHECK(oracle::rectangle_contains(g, geom, anchor_index(g, geom, x), x));
        }
      }
    }
  }

  TEST_CASE("rectangles round trip through anchors") {
    const Grid g = make_grid(1, 1, 6);
    const ScaleGeometry geom = scale_geometry(g, 2, 1, 2);
    for (std::size_t r = 0; r < geom.anchorCount; ++r) {
      const DyadicRectangle rect = rectangle_at(g, geom, 2, 1, 2, r);
      CHECK(rectangle_anchor(g, geom, rect) == r);
    }
  }

  TEST_CASE("finer scale nests in coarser") {
    const Grid g = make_grid(1, 1, 7);
    const ScaleGeometry fine = scale_geometry(g, 3, 3, 2);
    const ScaleGeometry coarse = scale_geometry(g, 2, 2, 2);
    for (std::size_t r = 0; r < fine.anchorCount; ++r) {
      const std::size_t corner = anchor_to_grid(g, fine, r);
      const std::size_t parent = anchor_index(g, coarse, corner);
      for (std::size_t x = 0; x < g.size(); x += 5) {
        if (oracle::rectangle_contains(g, fine, r, x)) CHECK(oracle::rectangle_contains(g, coarse, parent, x));
      }
    }
  }

  TEST_CASE("sub-sample scales are refused") {
    const Grid g = make_grid(1, 1, 4);
    CHECK_THROWS_AS(scale_geometry(g, 3, 3, 2), ResolutionError);
    CHECK_THROWS_AS(enumerate_rectangles(g, 3, 0, 2), ResolutionError);
    CHECK_NOTHROW(scale_geometry(g, 2, 2, 2));
  }

  TEST_CASE("lp_norm examples") {
    const Grid g = make_grid(1, 1, 5);
    const SampledFunction zero(g);
    CHECK(lp_norm(zero, 2) == 0.0);
    const SampledFunction one = oracle::sample(g, [](auto) { return cplx(1.0); });
    for (double p : {0.5, 1.0, 2.0, 3.7}) CHECK(lp_norm(one, p) == doctest::Approx(1.0).epsilon(1e-14));
    const SampledFunction half = oracle::sample(g, [](auto x) { return cplx(x[0] < 0.5 ? 1.0 : 0.0); });
    CHECK(lp_norm(half, 2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    const SampledFunction f = oracle::random_function(g, 3);
    const double base = lp_norm(f, 0.8);
    CHECK(lp_norm(cplx(-2.5, 1.0) * f, 0.8) == doctest::Approx(std::abs(cplx(-2.5, 1.0)) * base).epsilon(1e-12));
    CHECK_THROWS_AS(lp_norm(f, 0.0), DomainError);
    CHECK_THROWS_AS(lp_norm(f, -1.0), DomainError);
    CHECK_THROWS_AS(lp_norm(f, std::numeric_limits<double>::quiet_NaN()), DomainError);
  }

  TEST_CASE("sampled functions reject non-finite values and grid mismatch") {
    const Grid g = make_grid(1, 1, 3);
    std::vector<cplx> v(g.size());
    v[5] = cplx(std::numeric_limits<double>::infinity(), 0);
    CHECK_THROWS_AS(SampledFunction(g, v), DomainError);
    CHECK_THROWS_AS(SampledFunction(g, std::vector<cplx>(10)), ShapeError);
    CHECK_THROWS_AS(SampledFunction(g) + SampledFunction(make_grid(1, 1, 4)), ShapeError);
  }

  TEST_CASE("block files round trip") {
    const Grid g = make_grid(2, 1, 3);
    const SampledFunction f = oracle::random_function(g, 9);
    const auto path = std::filesystem::temp_directory_path() / "flaglp_grid_roundtrip.bin";
    save_function(path, f);
    CHECK(std::filesystem::file_size(path) == kBlockHeaderBytes + g.size() * 16);
    const SampledFunction back = load_function(path);
    CHECK(back.grid() == g);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back[i] == f[i]);
    std::filesystem::remove(path);
  }

  TEST_CASE("bad blocks are rejected") {
    const Grid g = make_grid(1, 1, 3);
    std::ostringstream out;
    write_block(out, BlockHeader{kBlockVersion, 1, 1, 3, g.size() * 16}, oracle::random_values(g.size(), 1));
    std::string bytes = out.str();
    {
      std::string bad = bytes;
      bad[0] = 'X';
      std::istringstream in(bad);
      CHECK_THROWS_AS(read_block(in), IoError);
    }
    {
      std::istringstream in(bytes.substr(0, bytes.size() - 8));
      CHECK_THROWS_AS(read_block(in), IoError);
    }
    {
      std::istringstream in(bytes.substr(0, 10));
      CHECK_THROWS_AS(read_block(in), IoError);
    }
    std::istringstream in(bytes);
    const Block b = read_block(in);
    CHECK(b.values.size() == g.size());
    CHECK_THROWS_AS(load_function("/nonexistent/missing.bin"), IoError);
  }

  TEST_CASE("csv export") {
    const Grid g = make_grid(1, 1, 3);
    std::ostringstream out;
    write_csv(out, oracle::random_function(g, 2));
    const std::string s = out.str();
    CHECK(std::count(s.begin(), s.end(), '\n') >= 64);
  }
}
