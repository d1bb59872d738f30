#include "flaglp/verify.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "flaglp/carleson.hpp"
#include "flaglp/corpus.hpp"
#include "flaglp/czd.hpp"
#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/filters.hpp"
#include "flaglp/kernels.hpp"
#include "flaglp/squarefuncs.hpp"
#include "flaglp/transform.hpp"

namespace flaglp {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

int pick(int requested, int fallback) { return requested > 0 ? requested : fallback; }

FilterProfile second_profile() {
  FilterProfile p;
  p.innerRadius = 0.6;
  p.outerRadius = 2.2;
  return p;
}

SampledFunction white_noise(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> normal;
  std::vector<cplx> v(grid.size());
  for (auto& x : v) x = normal(rng);
  return SampledFunction(grid, std::move(v));
}

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi == 0) return 1;
  return *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------

SuiteResult partition(const VerifyOptions& o) {
  const std::vector<int> levels = o.L > 0 ? std::vector<int>{o.L} : std::vector<int>{6, 7, 8};
  const int N = 2;
  json rows = json::array();
  double worst = 0;
  for (int L : levels) {
    const Grid grid = make_grid(1, 1, L);
    for (const FilterProfile& profile : {FilterProfile{}, second_profile()}) {
      const FilterBank bank = build_filter_bank(grid, profile, N);
      double r1 = 0, r2 = 0, rf = 0;
      const auto lp1 = bank.low_pass1_hat();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = lp1[i] * lp1[i];
        for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) s += std::pow(bank.psi1_hat(j)[i], 2);
        r1 = std::max(r1, std::abs(s - 1));
      }
      const auto lp2 = bank.low_pass2_hat();
      for (std::size_t i = 0; i < grid.second_factor_size(); ++i) {
        double s = lp2[i] * lp2[i];
        for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) s += std::pow(bank.psi2_hat(k)[i], 2);
        r2 = std::max(r2, std::abs(s - 1));
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = std::pow(bank.low_pass_hat()[i], 2);
        const auto e = grid.second_factor_index(i);
        for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
          for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) {
            s += std::pow(bank.psi1_hat(j)[i] * bank.psi2_hat(k)[e], 2);
          }
        }
        rf = std::max(rf, std::abs(s - 1));
      }
      worst = std::max({worst, r1, r2, rf});
      rows.push_back({{"L", L},
                      {"bank", bank.id()},
                      {"residual1", r1},
                      {"residual2", r2},
                      {"flagResidual", rf}});
    }
  }
  SuiteResult r{"partition", worst <= 1e-10, fmt("max residual %.3g (limit %.0e)", worst, 1e-10), {}};
  r.details = {{"suite", "partition"}, {"N", N}, {"maxResidual", worst}, {"tolerance", 1e-10}, {"rows", rows}};
  return r;
}

SuiteResult plancherel(const VerifyOptions& o) {
  const int L = pick(o.L, 7);
  const int N = 2;
  const Grid grid = make_grid(1, 1, L);
  const FilterBank bank = build_filter_bank(grid, FilterProfile{}, N);
  double worst = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < 20; ++i) {
    const SampledFunction f = white_noise(grid, o.seed * 1000003ULL + i);
    const double g2 = std::pow(lp_norm(g_flag(f, bank), 2.0), 2);
    auto spec = fft_forward(grid, f.values());
    const auto lp = bank.low_pass_hat();
    for (std::size_t q = 0; q < spec.size(); ++q) spec[q] *= lp[q];
    const double l2 = std::pow(lp_norm(SampledFunction(grid, fft_inverse(grid, spec)), 2.0), 2);
    const double f2 = std::pow(lp_norm(f, 2.0), 2);
    const double res = std::abs(g2 + l2 - f2) / f2;
    worst = std::max(worst, res);
    rows.push_back(res);
  }
  SuiteResult r{"plancherel", worst <= 1e-9, fmt("max relative residual %.3g (limit %.0e)", worst, 1e-9), {}};
  r.details = {{"suite", "plancherel"}, {"maxResidual", worst}, {"L", L}, {"N", N}, {"bank", bank.id()},
               {"tolerance", 1e-9}, {"residuals", rows}};
  return r;
}

SuiteResult remainder(const VerifyOptions& o) {
  const int L = pick(o.L, 8);
  const Grid grid = make_grid(1, 1, L);
  std::vector<double> est;
  for (int N = 1; N <= 4; ++N) est.push_back(remainder_norm_estimate(build_filter_bank(grid, FilterProfile{}, N), N));
  bool ok = true;
  json ratios = json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 1; i < est.size(); ++i) {
    const double q = est[i - 1] / est[i];
    ratios.push_back(q);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
    ok = ok && est[i] < est[i - 1] && q >= 1.5 && q <= 2.5;
  }
  SuiteResult r{"remainder", ok, fmt("step ratios in [%.3f, %.3f] (required [1.5, 2.5])", lo, hi), {}};
  r.details = {{"suite", "remainder"}, {"L", L}, {"N", {1, 2, 3, 4}}, {"estimates", est}, {"ratios", ratios}};
  return r;
}

SuiteResult roundtrip(const VerifyOptions& o) {
  const int L = pick(o.L, 7);
  const int N = 3;
  const double tol = 1e-8;
  const Grid grid = make_grid(1, 1, L);
  const FilterBank bank = build_filter_bank(grid, FilterProfile{}, N);
  CorpusOptions co;
  co.seed = o.seed;
  const auto corpus = generate_corpus(grid, co);
  double worst = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& f = corpus[i].f;
    const NeumannResult inv = neumann_inverse(f, bank, N, tol);
    const SampledFunction back = synthesize_discrete(analyze(inv.g, bank, N), bank);
    const double err = lp_norm(back - f, 2.0) / lp_norm(f, 2.0);
    worst = std::max(worst, err);
    rows.push_back({{"index", i}, {"tag", kind_tag(corpus[i].kind)}, {"relativeError", err},
                    {"iterations", inv.iterations}});
  }
  SuiteResult r{"roundtrip", worst <= 1e-7, fmt("max relative error %.3g (limit %.0e)", worst, 1e-7), {}};
  r.details = {{"suite", "roundtrip"}, {"L", L}, {"N", N}, {"tol", tol}, {"maxRelativeError", worst},
               {"items", rows}};
  return r;
}

SuiteResult pp_stability(const VerifyOptions& o) {
  const int L0 = pick(o.L, 7);
  const int N = 2;
  const std::vector<double> ps{0.8, 1.0, 2.0};
  std::vector<std::vector<double>> maxima(2, std::vector<double>(ps.size(), 0.0));
  bool inRange = true;
  json levels = json::array();
  for (int step = 0; step < 2; ++step) {
    const Grid grid = make_grid(1, 1, L0 + step);
    CorpusOptions co;
    co.seed = o.seed;
    const auto corpus = generate_corpus(grid, co);
    const FilterBank a = build_filter_bank(grid, FilterProfile{}, N);
    const FilterBank b = build_filter_bank(grid, second_profile(), N);
    json perP = json::array();
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
      double lo = std::numeric_limits<double>::infinity();
      for (const auto& item : corpus) {
        for (int order = 0; order < 2; ++order) {
          const PPReport rep = order ? pp_compare(item.f, b, a, ps[pi], N) : pp_compare(item.f, a, b, ps[pi], N);
          if (rep.degenerate) continue;
          maxima[static_cast<std::size_t>(step)][pi] = std::max(maxima[static_cast<std::size_t>(step)][pi], rep.ratio);
          lo = std::min(lo, rep.ratio);
          inRange = inRange && rep.ratio >= 1 && rep.ratio <= 20;
        }
      }
      perP.push_back({{"p", ps[pi]}, {"minRatio", lo}, {"maxRatio", maxima[static_cast<std::size_t>(step)][pi]}});
    }
    levels.push_back({{"L", L0 + step}, {"bankA", a.id()}, {"bankB", b.id()}, {"ratios", perP}});
  }
  double change = 0;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) change = std::max(change, std::abs(maxima[1][pi] / maxima[0][pi] - 1));
  SuiteResult r{"pp-stability", inRange && change <= 0.25, "", {}};
  r.summary = std::string("ratios ") + (inRange ? "within" : "outside") + " [1, 20]; " +
              fmt("max per-p change %.3f (limit %.2f)", change, 0.25);
  r.details = {{"suite", "pp-stability"}, {"N", N}, {"corpusSize", 20}, {"levels", levels}, {"maxChange", change}};
  return r;
}

SuiteResult cz(const VerifyOptions& o) {
  const int L = pick(o.L, 8);
  const int N = 3;
  const double p = 0.9, p1 = 2.0, p2 = 0.7;
  const Grid grid = make_grid(1, 1, L);
  const FilterBank bank = build_compact_bank(grid, 1, N);
  const SampledFunction f = band_limited_field(build_filter_bank(grid, FilterProfile{}, 2), o.seed);
  const SampledFunction S = cz_square_function(f, bank, N);
  std::vector<double> s;
  for (const cplx& v : S.values()) s.push_back(v.real());
  std::sort(s.begin(), s.end());
  const double lo = s[s.size() / 2];
  const double hi = s[s.size() * 95 / 100];
  std::vector<double> cg, cb;
  double additivity = 0;
  std::size_t violations = 0;
  json rows = json::array();
  for (int i = 0; i < 8; ++i) {
    const double alpha = lo * std::pow(hi / lo, i / 7.0);
    const CZResult res = cz_decompose(f, bank, alpha, N, p, p1, p2);
    cg.push_back(res.report.fittedC_g);
    cb.push_back(res.report.fittedC_b);
    additivity = std::max(additivity, res.report.additivityError);
    violations += res.report.supportViolations;
    rows.push_back({{"alpha", alpha},
                    {"fittedC_g", res.report.fittedC_g},
                    {"fittedC_b", res.report.fittedC_b},
                    {"additivityError", res.report.additivityError},
                    {"supportViolations", res.report.supportViolations},
                    {"classCounts", res.report.classCounts}});
  }
  const double sg = spread(cg), sb = spread(cb);
  const bool ok = additivity <= 1e-9 && violations == 0 && sg <= 10 && sb <= 10;
  SuiteResult r{"cz", ok, "", {}};
  r.summary = fmt("C_g spread %.2f, C_b spread %.2f (limit 10); ", sg, sb) +
              fmt("additivity %.2g; violations %.0f", additivity, static_cast<double>(violations));
  r.details = {{"suite", "cz"}, {"L", L}, {"N", N}, {"bank", bank.id()}, {"p", p}, {"p1", p1}, {"p2", p2},
               {"spreadC_g", sg}, {"spreadC_b", sb}, {"maxAdditivityError", additivity},
               {"supportViolations", violations}, {"sweep", rows}};
  return r;
}

CoefficientField sparse_sequence(const Grid& grid, std::mt19937_64& rng, const std::vector<std::pair<std::size_t, std::size_t>>& sites) {
  const int top = grid.L() - 2;
  CoefficientField c(grid, 1, ScaleRange{0, top}, ScaleRange{0, top});
  boost::random::normal_distribution<double> normal;
  for (const auto& [slot, anchor] : sites) c.slots()[slot].values[anchor] = cplx(normal(rng), normal(rng));
  return c;
}

SuiteResult duality(const VerifyOptions& o) {
  const std::vector<int> levels = o.L > 0 ? std::vector<int>{o.L, o.L + 1} : std::vector<int>{4, 5};
  json per = json::array();
  std::vector<double> constants;
  for (int L : levels) {
    const Grid grid = make_grid(1, 1, L);
    const int top = L - 2;
    const CoefficientField shape(grid, 1, ScaleRange{0, top}, ScaleRange{0, top});
    std::mt19937_64 rng(o.seed + static_cast<std::uint64_t>(L));
    double worst = 0;
    for (int pair = 0; pair < 50; ++pair) {
      std::vector<std::pair<std::size_t, std::size_t>> sites;
      const int count = boost::random::uniform_int_distribution<int>(2, 8)(rng);
      for (int c = 0; c < count; ++c) {
        const auto slot = boost::random::uniform_int_distribution<std::size_t>(0, shape.slots().size() - 1)(rng);
        const auto anchor =
            boost::random::uniform_int_distribution<std::size_t>(0, shape.slots()[slot].values.size() - 1)(rng);
        sites.emplace_back(slot, anchor);
      }
      // t shares half of s's support so the pairing is rarely zero.
      auto tSites = std::vector<std::pair<std::size_t, std::size_t>>(sites.begin(), sites.begin() + count / 2 + 1);
      const CoefficientField s = sparse_sequence(grid, rng, sites);
      const CoefficientField t = sparse_sequence(grid, rng, tSites);
      const auto candidates = generate_candidates(t, 64);
      const double bound = sp_norm(s, 1.0) * cp_norm(t, 1.0, candidates);
      if (bound > 0) worst = std::max(worst, std::abs(duality_pair(s, t)) / bound);
    }
    constants.push_back(worst);
    per.push_back({{"L", L}, {"pairs", 50}, {"constant", worst}});
  }
  const double sp = spread(constants);
  const bool ok = std::all_of(constants.begin(), constants.end(), [](double c) { return c > 0 && std::isfinite(c); }) &&
                  sp <= 2;
  SuiteResult r{"duality", ok, fmt("constant %.3f vs %.3f across grid sizes (limit factor 2)", constants[0], constants[1]), {}};
  r.details = {{"suite", "duality"}, {"p", 1}, {"levels", per}, {"spread", sp}};
  return r;
}

json check_json(const ConstantCheck& c) {
  return {{"label", c.label}, {"perRefinement", c.perRefinement}, {"spread", c.spread}, {"stable", c.stable}};
}

}  // namespace

json report_json(const KernelReport& r) {
  json size = json::array(), canc = json::array();
  for (const auto& c : r.size) size.push_back(check_json(c));
  for (const auto& c : r.cancellation) canc.push_back(check_json(c));
  return {{"kernel", r.kernel},
          {"geometry", r.geometry == SingularType::Flag ? "flag" : "product"},
          {"passed", r.passed},
          {"sizePassed", r.sizePassed},
          {"cancellationPassed", r.cancellationPassed},
          {"productSizePassed", r.productSizePassed},
          {"maxSpread", r.maxSpread},
          {"samplesPerRefinement", r.samplesPerRefinement},
          {"size", size},
          {"cancellation", canc}};
}

namespace {

SuiteResult kernels(const VerifyOptions&) {
  const KernelReport k2 = validate_flag_kernel(registry_kernel("k2-flag"));
  KernelSpec k1 = registry_kernel("k1-product");
  const KernelReport k1product = validate_product_kernel(k1);
  k1.type = SingularType::Flag;
  const KernelReport k1flag = validate_flag_kernel(k1);
  const KernelReport odd = validate_flag_kernel(registry_kernel("k2-odd"));
  double divergence = 0;
  for (const auto& c : k1flag.size) divergence = std::max(divergence, c.spread);
  const bool ok = k2.passed && !k1flag.passed && divergence >= 4 && k1product.passed;
  SuiteResult r{"kernels", ok, "", {}};
  r.summary = std::string("k2 flag ") + (k2.passed ? "pass" : "FAIL") + fmt(" (max spread %.2f); k1 flag divergence %.0f", k2.maxSpread, divergence) +
              "; k1 product " + (k1product.passed ? "pass" : "FAIL");
  r.details = {{"suite", "kernels"},
               {"k2Flag", report_json(k2)},
               {"k1Flag", report_json(k1flag)},
               {"k1FlagDivergence", divergence},
               {"k1Product", report_json(k1product)},
               {"k2OddFlag", report_json(odd)}};
  return r;
}

SuiteResult flag_convolution(const VerifyOptions& o) {
  const int L0 = pick(o.L, 7);
  json rows = json::array();
  std::vector<double> norms;
  json literal = json::array();
  for (int L : {L0, L0 + 1}) {
    const Grid grid = make_grid(1, 1, L);
    for (int e : {4, 2, 1}) {
      const double eps = e * grid.spacing();
      auto peak = [&](const std::string& name) {
        double best = 0;
        for (const cplx& v : truncated_multiplier(grid, registry_kernel(name), eps)) best = std::max(best, std::abs(v));
        return best;
      };
      const double norm = peak("k2-odd");
      norms.push_back(norm);
      rows.push_back({{"L", L}, {"epsOverSpacing", e}, {"operatorNorm", norm}});
      literal.push_back({{"L", L}, {"epsOverSpacing", e}, {"operatorNorm", peak("k2-flag")}});
    }
  }
  const double sp = spread(norms);
  SuiteResult r{"flag-convolution", sp <= 1.25, fmt("norm spread %.3f (limit %.2f)", sp, 1.25), {}};
  r.details = {{"suite", "flag-convolution"}, {"kernel", "k2-odd"}, {"sweep", rows}, {"spread", sp},
               {"literalK2", literal}};
  return r;
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"partition", "plancherel", "remainder", "roundtrip", "pp-stability", "cz", "duality", "kernels",
          "flag-convolution"};
}

SuiteResult run_suite(const std::string& name, const VerifyOptions& options) {
  if (name == "partition") return partition(options);
  if (name == "plancherel") return plancherel(options);
  if (name == "remainder") return remainder(options);
  if (name == "roundtrip") return roundtrip(options);
  if (name == "pp-stability") return pp_stability(options);
  if (name == "cz") return cz(options);
  if (name == "duality") return duality(options);
  if (name == "kernels") return kernels(options);
  if (name == "flag-convolution") return flag_convolution(options);
  throw ConfigError("unknown verify suite '" + name + "'");
}

}  // namespace flaglp
