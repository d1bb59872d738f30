#include "flaglp/corpus.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/io.hpp"
#include "flaglp/transform.hpp"
#include "json.hpp"

namespace flaglp {

namespace {

using Engine = std::mt19937_64;

std::uint64_t item_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1));
}

int uniform_int(Engine& rng, int lo, int hi) { return boost::random::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform(Engine& rng, double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

SampledFunction indicator_union(const Grid& grid, Engine& rng) {
  std::vector<cplx> v(grid.size());
  const int count = uniform_int(rng, 1, 4);
  const int maxExp = std::min(4, grid.L() - 1);
  for (int r = 0; r < count; ++r) {
    std::int64_t lo[kMaxDims], len[kMaxDims];
    for (int a = 0; a < grid.dims(); ++a) {
      const int e = uniform_int(rng, 1, maxExp);
      len[a] = static_cast<std::int64_t>(grid.side() >> e);
      lo[a] = uniform_int(rng, 0, (1 << e) - 1) * len[a];
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Coords c = grid.coords(i);
      bool inside = true;
      for (int a = 0; a < grid.dims() && inside; ++a) inside = c[a] >= lo[a] && c[a] < lo[a] + len[a];
      if (inside) v[i] = 1.0;
    }
  }
  return SampledFunction(grid, std::move(v));
}

SampledFunction single_atom(const FilterBank& bank, int N, Engine& rng) {
  std::vector<std::pair<int, int>> live;
  for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
    for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) {
      if (!bank.channel_is_zero(j, k)) live.emplace_back(j, k);
    }
  }
  if (live.empty()) throw ConfigError("bank has no nonzero channel to place an atom on");
  const auto [j, k] = live[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(live.size()) - 1))];
  CoefficientField field = empty_field(bank, N);
  ScaleSlot& slot = field.slot(j, k);
  const auto anchor = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(slot.values.size()) - 1));
  slot.values[anchor] = 1.0;
  return synthesize_discrete(field, bank);
}

SampledFunction smooth_bump(const Grid& grid, Engine& rng) {
  double centre[kMaxDims];
  for (int a = 0; a < grid.dims(); ++a) centre[a] = uniform(rng, 0.0, 1.0);
  const double radius = uniform(rng, 0.15, 0.35);
  std::vector<cplx> v(grid.size());
  const double h = grid.spacing();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Coords c = grid.coords(i);
    double r2 = 0;
    for (int a = 0; a < grid.dims(); ++a) {
      double d = static_cast<double>(c[a]) * h - centre[a];
      d -= std::round(d);
      r2 += d * d;
    }
    r2 /= radius * radius;
    if (r2 < 1) v[i] = std::exp(-1.0 / (1.0 - r2));
  }
  return SampledFunction(grid, std::move(v));
}

}  // namespace

std::string kind_tag(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::BandLimited:
      return "band-limited";
    case CorpusKind::Indicator:
      return "indicator";
    case CorpusKind::Atom:
      return "atom";
    case CorpusKind::Bump:
      return "bump";
  }
  return "unknown";
}

SampledFunction band_limited_field(const FilterBank& bank, std::uint64_t seed) {
  const Grid& grid = bank.grid();
  Engine rng(seed);
  boost::random::normal_distribution<double> normal;
  // Coefficients are drawn over a fixed frequency box so that the same seed
  // gives the same draws at every resolution that contains the box.
  const std::int64_t box = std::min<std::int64_t>(16, static_cast<std::int64_t>(grid.side() / 2) - 1);
  double annulusWeight[8];
  for (double& w : annulusWeight) w = uniform(rng, 0.5, 1.5);
  const auto lp = bank.low_pass_hat();
  std::vector<cplx> spec(grid.size());
  std::int64_t q[kMaxDims] = {};
  for (int a = 0; a < grid.dims(); ++a) q[a] = -box;
  bool any = false;
  for (;;) {
    const double re = normal(rng);
    const double im = normal(rng);
    std::int64_t peak = 0;
    bool secondNonzero = false;
    Coords c{};
    for (int a = 0; a < grid.dims(); ++a) {
      peak = std::max<std::int64_t>(peak, std::abs(q[a]));
      if (a >= grid.n() && q[a] != 0) secondNonzero = true;
      c[a] = q[a] < 0 ? q[a] + static_cast<std::int64_t>(grid.side()) : q[a];
    }
    const std::size_t flat = grid.flat(c);
    if (secondNonzero && lp[flat] <= 1e-6) {
      const int annulus = std::min(7, static_cast<int>(std::floor(std::log2(static_cast<double>(peak)))));
      spec[flat] = annulusWeight[annulus] * cplx(re, im);
      any = true;
    }
    int a = grid.dims() - 1;
    while (a >= 0 && ++q[a] > box) q[a--] = -box;
    if (a < 0) break;
  }
  if (!any) throw ResolutionError("grid too coarse for band-limited fields with this bank");
  auto values = fft_inverse(grid, spec);
  for (auto& v : values) v = v.real();
  SampledFunction f(grid, std::move(values));
  const double norm = lp_norm(f, 2.0);
  return (1.0 / norm) * f;
}

std::vector<CorpusItem> generate_corpus(const Grid& grid, const CorpusOptions& options) {
  std::vector<CorpusItem> items;
  if (options.count == 0) return items;
  if (options.kinds.empty()) throw ConfigError("corpus needs at least one kind");
  const FilterBank bank = build_filter_bank(grid, options.profile, options.N);
  for (std::size_t i = 0; i < options.count; ++i) {
    const CorpusKind kind = options.kinds[i % options.kinds.size()];
    const std::uint64_t seed = item_seed(options.seed, i);
    Engine rng(seed);
    SampledFunction f = [&] {
      switch (kind) {
        case CorpusKind::BandLimited:
          return band_limited_field(bank, seed);
        case CorpusKind::Indicator:
          return indicator_union(grid, rng);
        case CorpusKind::Atom:
          return single_atom(bank, options.N, rng);
        case CorpusKind::Bump:
          break;
      }
      return smooth_bump(grid, rng);
    }();
    CorpusItem item{kind, seed, std::move(f)};
    items.push_back(std::move(item));
  }
  return items;
}

void write_corpus(const std::filesystem::path& dir, const Grid& grid, const CorpusOptions& options,
                  const std::vector<CorpusItem>& items) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["generator"] = kCorpusGenerator;
  manifest["distributions"] = "boost.random";
  manifest["seed"] = options.seed;
  manifest["count"] = items.size();
  manifest["grid"] = {{"n", grid.n()}, {"m", grid.m()}, {"L", grid.L()}};
  manifest["N"] = options.N;
  manifest["profile"] = {{"innerRadius", options.profile.innerRadius},
                         {"outerRadius", options.profile.outerRadius},
                         {"smoothness", options.profile.smoothness}};
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "item_%04zu.bin", i);
    save_function(dir / name, items[i].f);
    list.push_back({{"index", i}, {"file", name}, {"tag", kind_tag(items[i].kind)}, {"seed", items[i].seed}});
  }
  manifest["items"] = std::move(list);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("cannot write corpus manifest");
}

}  // namespace flaglp
