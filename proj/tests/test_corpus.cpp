#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "flaglp/corpus.hpp"
#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/io.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace flaglp;

TEST_SUITE("corpus") {
  TEST_CASE("empty and repeatable corpora") {
    const Grid g = make_grid(1, 1, 6);
    CorpusOptions opts;
    opts.count = 0;
    CHECK(generate_corpus(g, opts).empty());
    opts.count = 8;
    const auto a = generate_corpus(g, opts);
    const auto b = generate_corpus(g, opts);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].kind == opts.kinds[i % 4]);
      CHECK(a[i].seed == b[i].seed);
      for (std::size_t x = 0; x < g.size(); ++x) REQUIRE(a[i].f[x] == b[i].f[x]);
    }
    opts.count = 3;
    const auto prefix = generate_corpus(g, opts);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      for (std::size_t x = 0; x < g.size(); ++x) REQUIRE(prefix[i].f[x] == a[i].f[x]);
    }
    opts.seed = 2;
    const auto other = generate_corpus(g, opts);
    CHECK(oracle::relative_l2(other[0].f, a[0].f) > 0.1);
    opts.kinds.clear();
    CHECK_THROWS_AS(generate_corpus(g, opts), ConfigError);
  }

  TEST_CASE("band-limited fields avoid the low-pass channel") {
    const Grid g = make_grid(1, 1, 7);
    const FilterBank bank = build_filter_bank(g, FilterProfile{}, 2);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const SampledFunction f = band_limited_field(bank, seed);
      CHECK(lp_norm(f, 2) == doctest::Approx(1.0).epsilon(1e-12));
      const SampledFunction lp(g, apply_multiplier(g, f.values(), bank.low_pass_hat()));
      CHECK(std::pow(lp_norm(lp, 2), 2) <= 1e-12);
      for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(f[i].imag() == 0.0);
      // No mass at second-factor frequency zero: every row sums to zero.
      for (std::size_t x = 0; x < g.side(); ++x) {
        cplx row{};
        for (std::size_t y = 0; y < g.side(); ++y) row += f[x * g.side() + y];
        REQUIRE(std::abs(row) <= 1e-12);
      }
    }
  }

  TEST_CASE("corpus files and manifest") {
    const Grid g = make_grid(1, 1, 6);
    CorpusOptions opts;
    opts.count = 5;
    opts.seed = 9;
    const auto items = generate_corpus(g, opts);
    const auto dir = std::filesystem::temp_directory_path() / "flaglp_corpus_test";
    std::filesystem::remove_all(dir);
    write_corpus(dir, g, opts, items);
    std::ifstream in(dir / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest["generator"] == kCorpusGenerator);
    CHECK(manifest["seed"] == 9);
    REQUIRE(manifest["items"].size() == 5);
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& entry = manifest["items"][i];
      CHECK(entry["tag"] == kind_tag(items[i].kind));
      const SampledFunction back = load_function(dir / entry["file"].get<std::string>());
      for (std::size_t x = 0; x < g.size(); ++x) REQUIRE(back[x] == items[i].f[x]);
    }
    std::filesystem::remove_all(dir);
  }
}
