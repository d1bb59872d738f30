#include "flaglp/transform.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/io.hpp"
#include "flaglp/parallel.hpp"
#include "json.hpp"

namespace flaglp {

CoefficientField::CoefficientField(const Grid& grid, int N, ScaleRange jRange, ScaleRange kRange)
    : grid_(grid), N_(N), jRange_(jRange), kRange_(kRange), lowPass_(grid.size()) {
  for (int j = jRange.lo; j <= jRange.hi; ++j) {
    for (int k = kRange.lo; k <= kRange.hi; ++k) {
      ScaleSlot s;
      s.j = j;
      s.k = k;
      s.geometry = scale_geometry(grid, j, k, N);
      s.values.assign(s.geometry.anchorCount, cplx{});
      slots_.push_back(std::move(s));
    }
  }
}

const ScaleSlot& CoefficientField::slot(int j, int k) const {
  if (!jRange_.contains(j) || !kRange_.contains(k)) throw RangeError("slot outside the field");
  return slots_[static_cast<std::size_t>((j - jRange_.lo) * kRange_.count() + (k - kRange_.lo))];
}

ScaleSlot& CoefficientField::slot(int j, int k) {
  if (!jRange_.contains(j) || !kRange_.contains(k)) throw RangeError("slot outside the field");
  return slots_[static_cast<std::size_t>((j - jRange_.lo) * kRange_.count() + (k - kRange_.lo))];
}

std::size_t CoefficientField::rectangle_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.values.size();
  return n;
}

bool CoefficientField::same_shape(const CoefficientField& other) const {
  return grid_ == other.grid_ && N_ == other.N_ && jRange_.lo == other.jRange_.lo &&
         jRange_.hi == other.jRange_.hi && kRange_.lo == other.kRange_.lo &&
         kRange_.hi == other.kRange_.hi;
}

CoefficientField empty_field(const FilterBank& bank, int N) {
  return CoefficientField(bank.grid(), N, bank.j_range(), bank.k_range());
}

namespace {

// Maps full-grid FFT bins onto the anchor lattice of one scale pair. The
// anchor lattice has D_a = 2^{e_a} points per axis, so sampling at anchors
// aliases bin q onto q mod D_a.
struct Layout {
  const Grid* grid = nullptr;
  ScaleGeometry geom;
  int exps[kMaxDims] = {};
  std::vector<int> shape;
  std::vector<cplx> box1;  // cell transfer along first-factor axes
  std::vector<cplx> box2;  // along second-factor axes

  std::size_t small_index(std::size_t i) const {
    std::size_t out = 0;
    const int d = grid->dims();
    const int L = grid->L();
    for (int a = 0; a < d; ++a) {
      const std::size_t c = (i >> (L * (d - 1 - a))) & (grid->side() - 1);
      out = (out << exps[a]) | (c & ((std::size_t{1} << exps[a]) - 1));
    }
    return out;
  }

  // Fourier transform of the unit-mass indicator of one cell at bin i.
  cplx box(std::size_t i) const {
    const int d = grid->dims();
    const int L = grid->L();
    cplx b{1.0, 0.0};
    for (int a = 0; a < d; ++a) {
      const std::size_t c = (i >> (L * (d - 1 - a))) & (grid->side() - 1);
      b *= a < grid->n() ? box1[c] : box2[c];
    }
    return b;
  }
};

std::vector<cplx> axis_box(const Grid& grid, std::size_t stride) {
  const std::size_t M = grid.side();
  std::vector<cplx> out(M);
  for (std::size_t c = 0; c < M; ++c) {
    const double q = static_cast<double>(grid.frequency(static_cast<std::int64_t>(c)));
    const double t = std::numbers::pi * q * static_cast<double>(stride) / static_cast<double>(M);
    const double sinc = t == 0 ? 1.0 : std::sin(t) / t;
    out[c] = std::polar(sinc, -t);
  }
  return out;
}

Layout make_layout(const Grid& grid, const ScaleGeometry& geom) {
  Layout l;
  l.grid = &grid;
  l.geom = geom;
  for (int a = 0; a < grid.dims(); ++a) {
    l.exps[a] = a < grid.n() ? geom.firstExponent : geom.secondExponent;
    l.shape.push_back(1 << l.exps[a]);
  }
  l.box1 = axis_box(grid, geom.firstStride);
  l.box2 = axis_box(grid, geom.secondStride);
  return l;
}

double channel_response(const FilterBank& bank, std::span<const double> a, std::span<const double> b,
                        std::size_t i) {
  return a[i] * b[bank.grid().second_factor_index(i)];
}

// sum over aliases of weight(q) * spec(q), one entry per anchor-lattice bin.
template <class Weight>
std::vector<cplx> fold(const Layout& l, std::span<const cplx> spec, Weight weight) {
  std::vector<cplx> out(l.geom.anchorCount);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const cplx w = weight(i);
    if (w != 0.0) out[l.small_index(i)] += w * spec[i];
  }
  return out;
}

void check_grid(const SampledFunction& f, const FilterBank& bank) {
  if (!(f.grid() == bank.grid())) throw ShapeError("function and filter bank live on different grids");
}

struct Channel {
  int j;
  int k;
};

std::vector<Channel> live_channels(const FilterBank& bank) {
  std::vector<Channel> out;
  for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
    for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) {
      if (!bank.channel_is_zero(j, k)) out.push_back({j, k});
    }
  }
  return out;
}

struct Term {
  Layout layout;
  std::span<const double> a;
  std::span<const double> b;
  std::vector<cplx> small;
  bool withBox = false;
  double weight = 1.0;
};

// sum over terms of response(q) * weight * [box(q)] * small[q mod D], plus
// the low-pass channel, chunked across workers.
std::vector<cplx> accumulate(const FilterBank& bank, const std::vector<Term>& terms,
                             std::span<const cplx> lowPassSpec) {
  const Grid& grid = bank.grid();
  const auto lp = bank.low_pass_hat();
  std::vector<cplx> out(grid.size());
  const std::size_t chunk = 4096;
  const std::size_t chunks = (grid.size() + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(grid.size(), lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      cplx acc = lp[i] * lowPassSpec[i];
      for (const Term& t : terms) {
        const double h = channel_response(bank, t.a, t.b, i);
        if (h == 0.0) continue;
        cplx v = h * t.weight * t.small[t.layout.small_index(i)];
        if (t.withBox) v *= t.layout.box(i);
        acc += v;
      }
      out[i] = acc;
    }
  });
  return out;
}

}  // namespace

std::vector<cplx> channel_from_spectrum(const FilterBank& bank, std::span<const cplx> spectrum, int j,
                                        int k) {
  const auto a = bank.psi1_hat(j);
  const auto b = bank.psi2_hat(k);
  std::vector<cplx> spec(spectrum.size());
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = channel_response(bank, a, b, i) * spectrum[i];
  return fft_inverse(bank.grid(), spec);
}

std::vector<cplx> channel_convolution(const SampledFunction& f, const FilterBank& bank, int j, int k) {
  check_grid(f, bank);
  return channel_from_spectrum(bank, fft_forward(f.grid(), f.values()), j, k);
}

CoefficientField analyze(const SampledFunction& f, const FilterBank& bank, int N) {
  check_grid(f, bank);
  const Grid& grid = f.grid();
  CoefficientField out = empty_field(bank, N);
  const auto spec = fft_forward(grid, f.values());
  auto slots = out.slots();
  parallel_for(slots.size(), [&](std::size_t s) {
    ScaleSlot& slot = slots[s];
    if (bank.channel_is_zero(slot.j, slot.k)) return;
    const Layout l = make_layout(grid, slot.geometry);
    const auto a = bank.psi1_hat(slot.j);
    const auto b = bank.psi2_hat(slot.k);
    auto folded = fold(l, spec, [&](std::size_t i) { return cplx(channel_response(bank, a, b, i)); });
    auto values = fft_nd(l.shape, folded, +1, false);
    const double inv = 1.0 / static_cast<double>(grid.size());
    for (auto& v : values) v *= inv;
    slot.values = std::move(values);
  });
  std::vector<cplx> lpSpec(spec.size());
  const auto lp = bank.low_pass_hat();
  for (std::size_t i = 0; i < spec.size(); ++i) lpSpec[i] = lp[i] * spec[i];
  out.low_pass() = fft_inverse(grid, lpSpec);
  return out;
}

SampledFunction synthesize_continuous(const SampledFunction& f, const FilterBank& bank) {
  check_grid(f, bank);
  const Grid& grid = f.grid();
  auto spec = fft_forward(grid, f.values());
  std::vector<double> total(grid.size(), 0.0);
  for (const Channel& c : live_channels(bank)) {
    const auto a = bank.psi1_hat(c.j);
    const auto b = bank.psi2_hat(c.k);
    for (std::size_t i = 0; i < total.size(); ++i) {
      const double h = channel_response(bank, a, b, i);
      total[i] += h * h;
    }
  }
  const auto lp = bank.low_pass_hat();
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= total[i] + lp[i] * lp[i];
  return SampledFunction(grid, fft_inverse(grid, spec));
}

SampledFunction synthesize_discrete(const CoefficientField& coeffs, const FilterBank& bank) {
  const Grid& grid = bank.grid();
  if (!(coeffs.grid() == grid) || coeffs.j_range().lo != bank.j_range().lo ||
      coeffs.j_range().hi != bank.j_range().hi || coeffs.k_range().lo != bank.k_range().lo ||
      coeffs.k_range().hi != bank.k_range().hi) {
    throw ShapeError("coefficient field does not match the filter bank");
  }
  std::vector<Term> terms;
  std::vector<const ScaleSlot*> sources;
  for (const ScaleSlot& slot : coeffs.slots()) {
    if (bank.channel_is_zero(slot.j, slot.k)) continue;
    Term t;
    t.layout = make_layout(grid, slot.geometry);
    t.a = bank.psi1_hat(slot.j);
    t.b = bank.psi2_hat(slot.k);
    t.withBox = true;
    // size * |R| = samples per rectangle.
    t.weight = static_cast<double>(slot.geometry.samplesPerRectangle);
    terms.push_back(std::move(t));
    sources.push_back(&slot);
  }
  // The full-grid FFT of the anchor comb is the anchor-lattice FFT tiled.
  parallel_for(terms.size(), [&](std::size_t s) {
    terms[s].small = fft_nd(terms[s].layout.shape, sources[s]->values, -1, false);
  });
  const auto lpSpec = fft_forward(grid, coeffs.low_pass());
  return SampledFunction(grid, fft_inverse(grid, accumulate(bank, terms, lpSpec)));
}

namespace {

// T_N or its adjoint directly in the frequency domain:
//   T:  out(q) = sum psi(q) B(q) fold(psi F)(q mod D) + lp^2 F
//   T*: out(q) = sum psi(q) fold(psi conj(B) F)(q mod D) + lp^2 F
SampledFunction apply_tn_impl(const SampledFunction& f, const FilterBank& bank, int N, bool adjoint) {
  check_grid(f, bank);
  const Grid& grid = f.grid();
  const auto spec = fft_forward(grid, f.values());
  std::vector<Term> terms;
  for (const Channel& c : live_channels(bank)) {
    Term t;
    t.layout = make_layout(grid, scale_geometry(grid, c.j, c.k, N));
    t.a = bank.psi1_hat(c.j);
    t.b = bank.psi2_hat(c.k);
    t.withBox = !adjoint;
    terms.push_back(std::move(t));
  }
  parallel_for(terms.size(), [&](std::size_t s) {
    Term& t = terms[s];
    if (adjoint) {
      t.small = fold(t.layout, spec, [&](std::size_t i) {
        return channel_response(bank, t.a, t.b, i) * std::conj(t.layout.box(i));
      });
    } else {
      t.small = fold(t.layout, spec, [&](std::size_t i) { return cplx(channel_response(bank, t.a, t.b, i)); });
    }
  });
  const auto lp = bank.low_pass_hat();
  std::vector<cplx> lpSpec(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) lpSpec[i] = lp[i] * spec[i];
  auto out = accumulate(bank, terms, lpSpec);
  return SampledFunction(grid, fft_inverse(grid, out));
}

double l2(const SampledFunction& f) {
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(f[i]);
  return std::sqrt(static_cast<double>(pairwise_sum(sq) * static_cast<long double>(f.grid().cell_volume())));
}

SampledFunction random_probe(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<cplx> v(grid.size());
  for (auto& x : v) x = normal(rng);
  return SampledFunction(grid, std::move(v));
}

}  // namespace

SampledFunction apply_tn(const SampledFunction& f, const FilterBank& bank, int N) {
  return apply_tn_impl(f, bank, N, false);
}

SampledFunction apply_tn_adjoint(const SampledFunction& f, const FilterBank& bank, int N) {
  return apply_tn_impl(f, bank, N, true);
}

SampledFunction remainder_apply(const SampledFunction& f, const FilterBank& bank, int N) {
  return f - apply_tn(f, bank, N);
}

double remainder_norm_estimate(const FilterBank& bank, int N, int steps, std::uint64_t seed) {
  SampledFunction v = random_probe(bank.grid(), seed);
  v = cplx(1.0 / l2(v)) * v;
  double estimate = 0;
  for (int s = 0; s < steps; ++s) {
    const SampledFunction rv = remainder_apply(v, bank, N);
    const SampledFunction w = rv - apply_tn_adjoint(rv, bank, N);
    const double lambda = l2(w);
    estimate = std::sqrt(lambda);
    if (lambda == 0) return 0;
    v = cplx(1.0 / lambda) * w;
  }
  return estimate;
}

NeumannResult neumann_inverse(const SampledFunction& f, const FilterBank& bank, int N, double tol,
                              int maxIterations) {
  check_grid(f, bank);
  if (!(tol > 0)) throw DomainError("tolerance must be positive");
  NeumannResult result{SampledFunction(f.grid()), 0, 0, 0};
  const SampledFunction probe = random_probe(f.grid(), 0x9e3779b97f4a7c15ULL);
  result.probeContraction = l2(remainder_apply(probe, bank, N)) / l2(probe);
  if (result.probeContraction >= 1.0) {
    throw DivergenceError("remainder is not a contraction (probe ratio " +
                          std::to_string(result.probeContraction) + " at N=" + std::to_string(N) +
                          "); increase N");
  }
  const double fn = l2(f);
  if (fn == 0) {
    result.iterations = 1;
    return result;
  }
  SampledFunction g = f;
  for (int it = 1;; ++it) {
    SampledFunction next = f + remainder_apply(g, bank, N);
    const double inc = l2(next - g);
    g = std::move(next);
    if (inc <= tol * fn) {
      result.iterations = it;
      break;
    }
    if (it >= maxIterations) {
      throw ConvergenceError("Neumann series did not reach tolerance in " + std::to_string(maxIterations) +
                             " iterations");
    }
  }
  result.relativeResidual = l2(apply_tn(g, bank, N) - f) / fn;
  result.g = std::move(g);
  return result;
}

void save_coefficients(const CoefficientField& coeffs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Grid& g = coeffs.grid();
  BlockHeader h;
  h.n = static_cast<std::uint8_t>(g.n());
  h.m = static_cast<std::uint8_t>(g.m());
  h.L = static_cast<std::uint8_t>(g.L());
  nlohmann::ordered_json manifest;
  manifest["n"] = g.n();
  manifest["m"] = g.m();
  manifest["L"] = g.L();
  manifest["N"] = coeffs.N();
  manifest["jRange"] = {coeffs.j_range().lo, coeffs.j_range().hi};
  manifest["kRange"] = {coeffs.k_range().lo, coeffs.k_range().hi};
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (const ScaleSlot& s : coeffs.slots()) {
    const std::string file = "slot_j" + std::to_string(s.j) + "_k" + std::to_string(s.k) + ".bin";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    write_block(out, h, s.values);
    nlohmann::ordered_json e;
    e["j"] = s.j;
    e["k"] = s.k;
    e["firstShape"] = std::vector<int>(static_cast<std::size_t>(g.n()), 1 << s.geometry.firstExponent);
    e["secondShape"] = std::vector<int>(static_cast<std::size_t>(g.m()), 1 << s.geometry.secondExponent);
    e["file"] = file;
    slots.push_back(std::move(e));
  }
  manifest["slots"] = std::move(slots);
  {
    std::ofstream out(dir / "lowpass.bin", std::ios::binary | std::ios::trunc);
    write_block(out, h, coeffs.low_pass());
  }
  manifest["lowPass"] = "lowpass.bin";
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

CoefficientField load_coefficients(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    const Grid grid = make_grid(manifest.at("n"), manifest.at("m"), manifest.at("L"));
    const ScaleRange jr{manifest.at("jRange").at(0), manifest.at("jRange").at(1)};
    const ScaleRange kr{manifest.at("kRange").at(0), manifest.at("kRange").at(1)};
    CoefficientField field(grid, manifest.at("N"), jr, kr);
    auto read = [&](const std::string& file, std::size_t expected) {
      std::ifstream block(dir / file, std::ios::binary);
      if (!block) throw IoError("cannot open " + (dir / file).string());
      Block b = read_block(block);
      if (b.header.n != grid.n() || b.header.m != grid.m() || b.header.L != grid.L() || b.values.size() != expected) {
        throw ShapeError(file + " does not match the manifest");
      }
      return std::move(b.values);
    };
    for (const auto& e : manifest.at("slots")) {
      ScaleSlot& slot = field.slot(e.at("j"), e.at("k"));
      slot.values = read(e.at("file"), slot.values.size());
    }
    field.low_pass() = read(manifest.at("lowPass"), field.low_pass().size());
    return field;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad coefficient manifest: " + std::string(e.what()));
  }
}

}  // namespace flaglp
