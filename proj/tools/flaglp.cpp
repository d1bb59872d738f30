#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "flaglp/carleson.hpp"
#include "flaglp/corpus.hpp"
#include "flaglp/czd.hpp"
#include "flaglp/error.hpp"
#include "flaglp/filters.hpp"
#include "flaglp/io.hpp"
#include "flaglp/kernels.hpp"
#include "flaglp/maximal.hpp"
#include "flaglp/parallel.hpp"
#include "flaglp/squarefuncs.hpp"
#include "flaglp/transform.hpp"
#include "flaglp/verify.hpp"
#include "flaglp/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace flaglp;

namespace {

struct Params {
  int n = 1;
  int m = 1;
  int L = 7;
  std::string mode = "annulus";
  double inner = 0.5;
  double outer = 2.0;
  double smoothness = 1.0;
  int M0 = 1;
  int N = 2;
  double p = 1.0;
  double p1 = 2.0;
  double p2 = 0.7;
  double alpha = 1.0;
  std::size_t budget = 64;
  double eps = 0;
  std::uint64_t seed = 1;
  std::size_t count = 20;
  std::string out;
  std::string report;
  int jobs = 0;
};

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Divergence:
    case ErrorKind::Convergence:
    case ErrorKind::Kernel:
    case ErrorKind::Integration:
      return 1;
    default:
      return 2;
  }
}

FilterProfile profile_of(const Params& P) {
  FilterProfile f;
  f.innerRadius = P.inner;
  f.outerRadius = P.outer;
  f.smoothness = P.smoothness;
  return f;
}

FilterBank make_bank(const Grid& grid, const Params& P, const std::string& mode) {
  if (mode == "compact") return build_compact_bank(grid, P.M0, P.N);
  return build_filter_bank(grid, profile_of(P), P.N);
}

json config_json(const Params& P, const std::string& mode) {
  return {{"n", P.n},         {"m", P.m},         {"L", P.L},           {"mode", mode},
          {"inner", P.inner}, {"outer", P.outer}, {"smoothness", P.smoothness},
          {"M0", P.M0},       {"N", P.N},         {"p", P.p},           {"p1", P.p1},
          {"p2", P.p2},       {"alpha", P.alpha}, {"budget", P.budget}, {"eps", P.eps},
          {"seed", P.seed},   {"count", P.count}, {"out", P.out},       {"jobs", worker_count()}};
}

void emit(const Params& P, const std::string& command, json config, json result) {
  json r;
  r["command"] = command;
  r["version"] = kVersion;
  r["config"] = std::move(config);
  r["result"] = std::move(result);
  const std::string text = r.dump(2) + "\n";
  if (P.report.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(P.report);
    out << text;
    if (!out) throw IoError("cannot write report " + P.report);
  }
}

std::string require_out(const Params& P, const std::string& fallback) { return P.out.empty() ? fallback : P.out; }

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

KernelSpec pick_kernel(const std::string& name, const std::string& expr, const std::string& type, int d1, int d2) {
  if (!expr.empty()) {
    return expression_kernel(expr, type == "product" ? SingularType::Product : SingularType::Flag, d1, d2);
  }
  KernelSpec k = registry_kernel(name);
  if (type == "product") k.type = SingularType::Product;
  if (type == "flag") k.type = SingularType::Flag;
  return k;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> v;
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError("bad coordinate '" + part + "' in point '" + text + "'");
    }
  }
  return v;
}

json complex_json(cplx v) { return {v.real(), v.imag()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flag Littlewood-Paley analysis toolkit", "flaglp"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file; keys are long option names");
  Params P;
  bool modeGiven = false;
  app.add_option("--n", P.n, "first factor dimension")->capture_default_str();
  app.add_option("--m", P.m, "second factor dimension")->capture_default_str();
  app.add_option("--L", P.L, "samples per axis are 2^L")->capture_default_str();
  app.add_option("--mode", P.mode, "filter bank: annulus or compact")
      ->check(CLI::IsMember({"annulus", "compact"}))
      ->capture_default_str()
      ->each([&](const std::string&) { modeGiven = true; });
  app.add_option("--inner", P.inner, "annulus inner radius")->capture_default_str();
  app.add_option("--outer", P.outer, "annulus outer radius")->capture_default_str();
  app.add_option("--smoothness", P.smoothness, "transition exponent")->capture_default_str();
  app.add_option("--M0", P.M0, "moment order of the compact bank")->capture_default_str();
  app.add_option("--N", P.N, "rectangle offset")->capture_default_str();
  app.add_option("--p", P.p, "exponent")->capture_default_str();
  app.add_option("--p1", P.p1, "good-part exponent")->capture_default_str();
  app.add_option("--p2", P.p2, "bad-part exponent")->capture_default_str();
  app.add_option("--alpha", P.alpha, "level-set threshold")->capture_default_str();
  app.add_option("--budget", P.budget, "candidate open sets")->capture_default_str();
  app.add_option("--eps", P.eps, "kernel truncation radius; 0 means one grid spacing")->capture_default_str();
  app.add_option("--seed", P.seed, "random seed")->capture_default_str();
  app.add_option("--count", P.count, "corpus size")->capture_default_str();
  app.add_option("--out", P.out, "output file or directory");
  app.add_option("--report", P.report, "write the JSON report here instead of stdout");
  app.add_option("--jobs", P.jobs, "worker threads (default FLAGLP_JOBS or all cores)")->check(CLI::PositiveNumber);

  std::string input;
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("input", input, "sampled function block")->required()->check(CLI::ExistingFile);
    sub->fallthrough();
  };

  auto* analyzeCmd = app.add_subcommand("analyze", "sample every channel at the rectangle anchors");
  add_input(analyzeCmd);
  std::string dumpCoeffs;
  analyzeCmd->add_option("--dump-coeffs", dumpCoeffs, "write the coefficient field to this directory");

  auto* synthCmd = app.add_subcommand("synthesize", "discrete synthesis from a coefficient directory");
  std::string coeffDir;
  synthCmd->add_option("coefficients", coeffDir, "directory written by analyze --dump-coeffs")
      ->required()
      ->check(CLI::ExistingDirectory);
  synthCmd->fallthrough();

  auto* sqCmd = app.add_subcommand("squarefunc", "flag square function values");
  add_input(sqCmd);
  bool discrete = false;
  sqCmd->add_flag("--discrete", discrete, "use the anchor-sampled discrete square function");

  auto* hardyCmd = app.add_subcommand("hardy-norm", "discrete flag Hardy quasi-norm, p in (0, 1]");
  add_input(hardyCmd);

  auto* cmoCmd = app.add_subcommand("cmo-norm", "Carleson-sum norm over candidate open sets");
  add_input(cmoCmd);
  std::string candidatesFile;
  std::size_t autoBudget = 0;
  auto* candOpt = cmoCmd->add_option("--candidates", candidatesFile, "JSON candidate list")->check(CLI::ExistingFile);
  cmoCmd->add_option("--auto-budget", autoBudget, "generate this many candidates")->excludes(candOpt);

  auto* maxCmd = app.add_subcommand("maximal", "dyadic maximal functions");
  add_input(maxCmd);
  bool strongFlag = false, hlFlag = false;
  double cap = 1.0;
  auto* strongOpt = maxCmd->add_flag("--strong", strongFlag, "dyadic rectangles");
  maxCmd->add_flag("--hl", hlFlag, "dyadic cubes")->excludes(strongOpt);
  maxCmd->add_option("--cap", cap, "dilation cap: smallest side fraction")->capture_default_str();

  auto* czCmd = app.add_subcommand("cz-decompose", "Calderon-Zygmund decomposition f = g + b");
  add_input(czCmd);
  double threshold = 0.5;
  czCmd->add_option("--threshold", threshold, "dilated level-set threshold")->capture_default_str();

  auto* kernelCmd = app.add_subcommand("kernel", "kernel certification, projection and convolution");
  kernelCmd->require_subcommand(1);
  kernelCmd->fallthrough();
  std::string kernelName = "k2-flag", expr, geometry;
  int d1 = 1, d2 = 1;
  auto add_kernel = [&](CLI::App* sub) {
    sub->add_option("--kernel", kernelName, "registry name")->capture_default_str();
    sub->add_option("--expr", expr, "custom kernel in x, y, z, i, pi, abs, sqrt, exp, log, sin, cos");
    sub->add_option("--type", geometry, "flag or product")->check(CLI::IsMember({"flag", "product"}));
    sub->add_option("--d1", d1, "first factor dimension of --expr")->capture_default_str();
    sub->add_option("--d2", d2, "second factor dimension of --expr")->capture_default_str();
    sub->fallthrough();
  };
  auto* kValidate = kernelCmd->add_subcommand("validate", "size and cancellation certification");
  add_kernel(kValidate);
  std::size_t samples = 400;
  kValidate->add_option("--samples", samples, "sample budget per refinement")->capture_default_str();
  auto* kProject = kernelCmd->add_subcommand("project", "integrate a product kernel to a flag kernel");
  add_kernel(kProject);
  std::vector<std::string> points;
  bool torus = false;
  kProject->add_option("--at", points, "evaluation point x1,..,y (repeatable)")->required();
  kProject->add_flag("--torus", torus, "integrate over the unit circle instead of the line");
  auto* kConvolve = kernelCmd->add_subcommand("convolve", "truncated flag convolution");
  add_kernel(kConvolve);
  kConvolve->add_option("input", input, "sampled function block")->required()->check(CLI::ExistingFile);
  bool majorant = false;
  kConvolve->add_flag("--majorant", majorant, "fit the strong-maximal majorant constant");

  auto* verifyCmd = app.add_subcommand("verify", "run an acceptance suite");
  verifyCmd->fallthrough();
  std::string suite = "all";
  std::vector<std::string> suiteChoices = suite_names();
  suiteChoices.push_back("all");
  verifyCmd->add_option("--suite", suite, "suite name or all")->check(CLI::IsMember(suiteChoices))->capture_default_str();

  auto* corpusCmd = app.add_subcommand("gen-corpus", "deterministic test corpus");
  corpusCmd->fallthrough();

  auto* ppCmd = app.add_subcommand("ppreport", "Plancherel-Polya sup/inf comparison between two banks");
  add_input(ppCmd);
  double inner2 = 0.6, outer2 = 2.2;
  ppCmd->add_option("--inner2", inner2, "second bank inner radius")->capture_default_str();
  ppCmd->add_option("--outer2", outer2, "second bank outer radius")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (P.jobs > 0) set_worker_count(static_cast<std::size_t>(P.jobs));
    const std::string mode = P.mode;
    json config = config_json(P, mode);

    if (analyzeCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const FilterBank bank = make_bank(f.grid(), P, mode);
      const CoefficientField c = analyze(f, bank, P.N);
      if (!dumpCoeffs.empty()) save_coefficients(c, dumpCoeffs);
      json slots = json::array();
      for (const ScaleSlot& s : c.slots()) {
        double energy = 0;
        for (const cplx& v : s.values) energy += std::norm(v);
        slots.push_back({{"j", s.j}, {"k", s.k}, {"anchors", s.values.size()}, {"energy", energy}});
      }
      config["input"] = input;
      emit(P, "analyze", config,
           {{"bank", bank.id()}, {"rectangles", c.rectangle_count()}, {"slots", slots},
            {"coefficients", dumpCoeffs.empty() ? json(nullptr) : json(dumpCoeffs)}});
    } else if (synthCmd->parsed()) {
      const CoefficientField c = load_coefficients(coeffDir);
      Params Q = P;
      Q.N = c.N();
      const FilterBank bank = make_bank(c.grid(), Q, mode);
      const SampledFunction f = synthesize_discrete(c, bank);
      const std::string out = require_out(P, "synthesized.bin");
      ensure_parent(out);
      save_function(out, f);
      config["coefficients"] = coeffDir;
      config["N"] = c.N();
      emit(P, "synthesize", config, {{"bank", bank.id()}, {"output", out}, {"l2", lp_norm(f, 2.0)}});
    } else if (sqCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const FilterBank bank = make_bank(f.grid(), P, mode);
      const SampledFunction g = discrete ? g_flag_discrete(analyze(f, bank, P.N)) : g_flag(f, bank);
      const std::string out = require_out(P, "squarefunc.bin");
      ensure_parent(out);
      save_function(out, g);
      config["input"] = input;
      config["discrete"] = discrete;
      emit(P, "squarefunc", config, {{"bank", bank.id()}, {"output", out}, {"lpNorm", lp_norm(g, P.p)}});
    } else if (hardyCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const FilterBank bank = make_bank(f.grid(), P, mode);
      config["input"] = input;
      emit(P, "hardy-norm", config, {{"bank", bank.id()}, {"p", P.p}, {"norm", hardy_norm(f, bank, P.p, P.N)}});
    } else if (cmoCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const FilterBank bank = make_bank(f.grid(), P, mode);
      std::vector<OpenSetApprox> candidates;
      std::string source;
      if (!candidatesFile.empty()) {
        std::ifstream in(candidatesFile);
        std::stringstream s;
        s << in.rdbuf();
        candidates = candidates_from_json(f.grid(), s.str());
        source = candidatesFile;
      } else {
        const std::size_t b = autoBudget > 0 ? autoBudget : P.budget;
        candidates = generate_candidates(carleson_energy_field(f, bank, P.N), b);
        source = "auto:" + std::to_string(b);
      }
      config["input"] = input;
      config["candidates"] = source;
      emit(P, "cmo-norm", config,
           {{"bank", bank.id()}, {"p", P.p}, {"candidateCount", candidates.size()},
            {"norm", cmo_norm(f, bank, P.p, P.N, candidates)}});
    } else if (maxCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const SampledFunction mf = hlFlag ? hl_maximal(f, cap) : strong_maximal(f, cap);
      const std::string out = require_out(P, "maximal.bin");
      ensure_parent(out);
      save_function(out, mf);
      config["input"] = input;
      config["family"] = hlFlag ? "cubes" : "rectangles";
      config["cap"] = cap;
      double sup = 0;
      for (const cplx& v : mf.values()) sup = std::max(sup, std::abs(v));
      emit(P, "maximal", config, {{"output", out}, {"supNorm", sup}});
    } else if (czCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const std::string czMode = modeGiven ? mode : "compact";
      if (czMode == "annulus") {
        std::cerr << "warning: annulus banks are not compactly supported; support localization is approximate\n";
      }
      const FilterBank bank = make_bank(f.grid(), P, czMode);
      CZOptions opts;
      opts.dilationThreshold = threshold;
      const CZResult res = cz_decompose(f, bank, P.alpha, P.N, P.p, P.p1, P.p2, opts);
      const fs::path dir = require_out(P, "cz");
      fs::create_directories(dir);
      save_function(dir / "g.bin", res.g);
      save_function(dir / "b.bin", res.b);
      const CZReport& r = res.report;
      json result = {{"bank", bank.id()},
                     {"alpha", r.alpha},
                     {"p", r.p},
                     {"p1", r.p1},
                     {"p2", r.p2},
                     {"gNorm", r.gNorm},
                     {"bNorm", r.bNorm},
                     {"fNorm", r.fNorm},
                     {"fittedC_g", r.fittedC_g},
                     {"fittedC_b", r.fittedC_b},
                     {"levelSetMeasures", r.levelSetMeasures},
                     {"classCounts", r.classCounts},
                     {"supportViolations", r.supportViolations},
                     {"additivityError", r.additivityError},
                     {"neumannIterations", r.neumannIterations},
                     {"dilationThreshold", r.dilationThreshold}};
      config["input"] = input;
      config["mode"] = czMode;
      config["threshold"] = threshold;
      {
        json full = {{"command", "cz-decompose"}, {"version", kVersion}, {"config", config}, {"result", result}};
        std::ofstream out(dir / "report.json");
        out << full.dump(2) << '\n';
      }
      emit(P, "cz-decompose", config, result);
    } else if (kernelCmd->parsed()) {
      config["kernel"] = expr.empty() ? kernelName : expr;
      if (kValidate->parsed()) {
        const KernelSpec k = pick_kernel(kernelName, expr, geometry, d1, d2);
        ValidationOptions opts;
        opts.sampleBudget = samples;
        const KernelReport rep =
            k.type == SingularType::Flag ? validate_flag_kernel(k, opts) : validate_product_kernel(k, opts);
        config["samples"] = samples;
        emit(P, "kernel validate", config, report_json(rep));
        return rep.passed ? 0 : 1;
      }
      if (kProject->parsed()) {
        const std::string name = expr.empty() && kernelName == "k2-flag" ? "smooth-bump" : kernelName;
        KernelSpec ksharp = expr.empty() ? registry_kernel(name) : expression_kernel(expr, SingularType::Product, d1, d2);
        ksharp.type = SingularType::Product;
        ProjectionOptions opts;
        opts.domain = torus ? ProjectionDomain::Torus : ProjectionDomain::Real;
        const KernelSpec k = project_to_flag(ksharp, opts);
        json values = json::array();
        for (const std::string& pt : points) {
          const auto v = parse_point(pt);
          if (static_cast<int>(v.size()) != k.firstDim + k.secondDim) {
            throw ConfigError("point '" + pt + "' needs " + std::to_string(k.firstDim + k.secondDim) + " coordinates");
          }
          const std::span<const double> all(v);
          values.push_back({{"point", v},
                            {"value", complex_json(k.evaluate(all.first(static_cast<std::size_t>(k.firstDim)),
                                                              all.subspan(static_cast<std::size_t>(k.firstDim))))}});
        }
        config["kernel"] = expr.empty() ? name : expr;
        config["torus"] = torus;
        emit(P, "kernel project", config, {{"kernel", k.name}, {"values", values}});
        return 0;
      }
      const SampledFunction f = load_function(input);
      const KernelSpec k = pick_kernel(kernelName, expr, geometry, d1, d2);
      const double eps = P.eps > 0 ? P.eps : f.grid().spacing();
      const FlagConvolution res = flag_convolve(f, k, eps, majorant);
      const std::string out = require_out(P, "convolved.bin");
      ensure_parent(out);
      save_function(out, res.output);
      config["input"] = input;
      config["eps"] = eps;
      config["majorant"] = majorant;
      json result = {{"output", out}, {"operatorNorm", res.operatorNorm}};
      if (majorant) result["majorantConstant"] = res.majorantConstant;
      emit(P, "kernel convolve", config, result);
    } else if (verifyCmd->parsed()) {
      VerifyOptions opts;
      opts.L = app.get_option("--L")->count() > 0 ? P.L : 0;
      opts.seed = P.seed;
      const std::vector<std::string> names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
      bool all = true;
      json results = json::array();
      for (const std::string& name : names) {
        SuiteResult r = run_suite(name, opts);
        std::cerr << (r.passed ? "PASS " : "FAIL ") << r.suite << ": " << r.summary << '\n';
        all = all && r.passed;
        r.details["passed"] = r.passed;
        results.push_back(std::move(r.details));
      }
      config["suite"] = suite;
      config["L"] = opts.L;
      emit(P, "verify", config, names.size() == 1 ? results[0] : json{{"passed", all}, {"suites", results}});
      return all ? 0 : 1;
    } else if (corpusCmd->parsed()) {
      const Grid grid = make_grid(P.n, P.m, P.L);
      CorpusOptions opts;
      opts.count = P.count;
      opts.seed = P.seed;
      opts.profile = profile_of(P);
      opts.N = P.N;
      const auto items = generate_corpus(grid, opts);
      const std::string out = require_out(P, "corpus");
      write_corpus(out, grid, opts, items);
      json tags = json::array();
      for (const auto& it : items) tags.push_back(kind_tag(it.kind));
      config["generator"] = kCorpusGenerator;
      emit(P, "gen-corpus", config, {{"directory", out}, {"count", items.size()}, {"tags", tags}});
    } else if (ppCmd->parsed()) {
      const SampledFunction f = load_function(input);
      const FilterBank a = make_bank(f.grid(), P, "annulus");
      Params Q = P;
      Q.inner = inner2;
      Q.outer = outer2;
      const FilterBank b = make_bank(f.grid(), Q, "annulus");
      const PPReport r = pp_compare(f, a, b, P.p, P.N);
      config["input"] = input;
      config["inner2"] = inner2;
      config["outer2"] = outer2;
      emit(P, "ppreport", config,
           {{"p", r.p}, {"supNorm", r.supNorm}, {"infNorm", r.infNorm}, {"ratio", r.ratio},
            {"degenerate", r.degenerate}, {"bankA", r.bankA}, {"bankB", r.bankB}});
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
