#include "flaglp/carleson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/parallel.hpp"
#include "flaglp/squarefuncs.hpp"
#include "json.hpp"

namespace flaglp {

namespace {

// Summed-area table over a (side+1)^d lattice; entry c holds the number of
// set samples in the box [0, c).
std::vector<std::uint32_t> build_table(const Grid& grid, std::span<const char> mask) {
  const int d = grid.dims();
  const std::size_t w = grid.side() + 1;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= w;
  std::vector<std::uint32_t> t(total, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Coords c = grid.coords(i);
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * w + static_cast<std::size_t>(c[a] + 1);
    t[idx] = 1;
  }
  std::size_t stride = 1;
  for (int a = d - 1; a >= 0; --a) {
    for (std::size_t i = 0; i < total; ++i) {
      if ((i / stride) % w != 0) t[i] += t[i - stride];
    }
    stride *= w;
  }
  return t;
}

std::uint32_t table_box(const Grid& grid, const std::vector<std::uint32_t>& t, const Coords& lo,
                        const Coords& extent) {
  const int d = grid.dims();
  const std::size_t w = grid.side() + 1;
  std::int64_t sum = 0;
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    std::size_t idx = 0;
    int sign = 1;
    for (int a = 0; a < d; ++a) {
      const bool upper = (corner >> a) & 1u;
      idx = idx * w + static_cast<std::size_t>(upper ? lo[a] + extent[a] : lo[a]);
      if (!upper) sign = -sign;
    }
    sum += sign * static_cast<std::int64_t>(t[idx]);
  }
  return static_cast<std::uint32_t>(sum);
}

template <class Fn>
void for_each_in_box(const Grid& grid, const Coords& lo, const Coords& extent, Fn fn) {
  const int d = grid.dims();
  Coords c = lo;
  for (;;) {
    fn(grid.flat(c));
    int a = d - 1;
    while (a >= 0) {
      if (++c[a] < lo[a] + extent[a]) break;
      c[a] = lo[a];
      --a;
    }
    if (a < 0) return;
  }
}

void rectangle_box(const Grid& grid, const ScaleGeometry& geom, std::size_t anchor, Coords& lo, Coords& extent) {
  lo = grid.coords(anchor_to_grid(grid, geom, anchor));
  for (int a = 0; a < grid.dims(); ++a) {
    extent[a] = static_cast<std::int64_t>(a < grid.n() ? geom.firstStride : geom.secondStride);
  }
}

void cube_decompose(const Grid& grid, const std::vector<std::uint32_t>& table, int N, int e, const Coords& lo,
                    std::vector<DyadicRectangle>& out) {
  const std::int64_t side = std::int64_t{1} << (grid.L() - e);
  Coords extent{};
  std::uint64_t volume = 1;
  for (int a = 0; a < grid.dims(); ++a) {
    extent[a] = side;
    volume *= static_cast<std::uint64_t>(side);
  }
  const std::uint32_t count = table_box(grid, table, lo, extent);
  if (count == 0) return;
  if (count == volume) {
    DyadicRectangle r;
    r.j = e - N;
    r.k = e - N;
    r.N = N;
    for (int a = 0; a < grid.dims(); ++a) {
      if (a < grid.n()) {
        r.iIdx[a] = lo[a] / side;
      } else {
        r.jIdx[a - grid.n()] = lo[a] / side;
      }
    }
    out.push_back(r);
    return;
  }
  const std::int64_t half = side / 2;
  for (unsigned child = 0; child < (1u << grid.dims()); ++child) {
    Coords c = lo;
    for (int a = 0; a < grid.dims(); ++a) {
      if ((child >> (grid.dims() - 1 - a)) & 1u) c[a] += half;
    }
    cube_decompose(grid, table, N, e + 1, c, out);
  }
}

void check_p(double p) {
  if (!(p > 0) || p > 1) throw DomainError("Carleson norms need p in (0, 1]");
}

}  // namespace

OpenSetApprox::OpenSetApprox(const Grid& grid, std::vector<DyadicRectangle> rects, std::vector<char> mask)
    : grid_(grid), rects_(std::move(rects)), mask_(std::move(mask)) {
  cells_ = static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), char{1}));
  if (cells_ == 0) throw ConfigError("open set approximation must have positive measure");
  measure_ = static_cast<double>(cells_) * grid_.cell_volume();
  table_ = build_table(grid_, mask_);
}

OpenSetApprox OpenSetApprox::from_rectangles(const Grid& grid, std::vector<DyadicRectangle> rects) {
  std::vector<char> mask(grid.size(), 0);
  for (const DyadicRectangle& r : rects) {
    const ScaleGeometry geom = scale_geometry(grid, r.j, r.k, r.N);
    Coords lo{}, extent{};
    rectangle_box(grid, geom, rectangle_anchor(grid, geom, r), lo, extent);
    for_each_in_box(grid, lo, extent, [&](std::size_t i) { mask[i] = 1; });
  }
  return OpenSetApprox(grid, std::move(rects), std::move(mask));
}

OpenSetApprox OpenSetApprox::from_mask(const Grid& grid, std::vector<char> mask, int N) {
  if (mask.size() != grid.size()) throw ShapeError("set mask does not match grid");
  for (char& c : mask) c = c ? 1 : 0;
  auto rects = decompose_mask(grid, mask, N);
  return OpenSetApprox(grid, std::move(rects), std::move(mask));
}

std::uint32_t OpenSetApprox::box_count(const Coords& lo, const Coords& extent) const {
  return table_box(grid_, table_, lo, extent);
}

bool OpenSetApprox::contains(const ScaleGeometry& geom, std::size_t anchor) const {
  Coords lo{}, extent{};
  rectangle_box(grid_, geom, anchor, lo, extent);
  return box_count(lo, extent) == geom.samplesPerRectangle;
}

bool OpenSetApprox::contains(const DyadicRectangle& r) const {
  const ScaleGeometry geom = scale_geometry(grid_, r.j, r.k, r.N);
  return contains(geom, rectangle_anchor(grid_, geom, r));
}

std::vector<DyadicRectangle> decompose_mask(const Grid& grid, std::span<const char> mask, int N) {
  if (mask.size() != grid.size()) throw ShapeError("set mask does not match grid");
  if (N < 1 || N > grid.L()) throw ConfigError("offset N out of range for mask decomposition");
  const auto table = build_table(grid, mask);
  std::vector<DyadicRectangle> out;
  const std::int64_t side = std::int64_t{1} << (grid.L() - N);
  const std::size_t blocks = std::size_t{1} << (N * grid.dims());
  for (std::size_t b = 0; b < blocks; ++b) {
    Coords lo{};
    std::size_t rest = b;
    for (int a = grid.dims() - 1; a >= 0; --a) {
      lo[a] = static_cast<std::int64_t>(rest & ((std::size_t{1} << N) - 1)) * side;
      rest >>= N;
    }
    cube_decompose(grid, table, N, N, lo, out);
  }
  return out;
}

double sp_norm(const CoefficientField& s, double p) {
  const Grid& grid = s.grid();
  std::vector<double> total(grid.size(), 0.0);
  for (const ScaleSlot& slot : s.slots()) {
    bool any = false;
    for (const cplx& v : slot.values) any = any || v != 0.0;
    if (!any) continue;
    const double inv = 1.0 / slot.geometry.measure;
    for (std::size_t i = 0; i < total.size(); ++i) {
      total[i] += std::norm(slot.values[anchor_index(grid, slot.geometry, i)]) * inv;
    }
  }
  for (double& v : total) v = std::sqrt(v);
  return lp_norm(total, grid, p);
}

double cp_norm(const CoefficientField& t, double p, std::span<const OpenSetApprox> candidates) {
  check_p(p);
  if (candidates.empty()) throw ConfigError("cp_norm needs at least one candidate set");
  for (const auto& c : candidates) {
    if (!(c.grid() == t.grid())) throw ShapeError("candidate set lives on a different grid");
  }
  std::vector<double> values(candidates.size(), 0.0);
  parallel_for(candidates.size(), [&](std::size_t c) {
    const OpenSetApprox& omega = candidates[c];
    long double sum = 0;
    for (const ScaleSlot& slot : t.slots()) {
      for (std::size_t a = 0; a < slot.values.size(); ++a) {
        if (slot.values[a] == 0.0) continue;
        if (omega.contains(slot.geometry, a)) sum += std::norm(slot.values[a]);
      }
    }
    values[c] = std::sqrt(std::pow(omega.measure(), 1.0 - 2.0 / p) * static_cast<double>(sum));
  });
  return *std::max_element(values.begin(), values.end());
}

CoefficientField carleson_energy_field(const SampledFunction& f, const FilterBank& bank, int N) {
  if (!(f.grid() == bank.grid())) throw ShapeError("function and filter bank live on different grids");
  const Grid& grid = f.grid();
  CoefficientField out = empty_field(bank, N);
  const auto spec = fft_forward(grid, f.values());
  auto slots = out.slots();
  parallel_for(slots.size(), [&](std::size_t s) {
    ScaleSlot& slot = slots[s];
    if (bank.channel_is_zero(slot.j, slot.k)) return;
    const auto conv = channel_from_spectrum(bank, spec, slot.j, slot.k);
    std::vector<double> energy(slot.values.size(), 0.0);
    for (std::size_t i = 0; i < conv.size(); ++i) energy[anchor_index(grid, slot.geometry, i)] += std::norm(conv[i]);
    for (std::size_t a = 0; a < energy.size(); ++a) slot.values[a] = std::sqrt(energy[a] * grid.cell_volume());
  });
  return out;
}

double cmo_norm(const SampledFunction& f, const FilterBank& bank, double p, int N,
                std::span<const OpenSetApprox> candidates) {
  check_p(p);
  return cp_norm(carleson_energy_field(f, bank, N), p, candidates);
}

cplx duality_pair(const CoefficientField& s, const CoefficientField& t) {
  if (!s.same_shape(t)) throw ShapeError("sequences have different index shapes");
  cplx sum{};
  const auto a = s.slots();
  const auto b = t.slots();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].values.size(); ++i) sum += a[k].values[i] * std::conj(b[k].values[i]);
  }
  return sum;
}

std::vector<OpenSetApprox> generate_candidates(const CoefficientField& t, std::size_t budget) {
  if (budget < 1) throw ConfigError("candidate budget must be at least 1");
  const Grid& grid = t.grid();
  struct Entry {
    double density;
    std::size_t slot;
    std::size_t anchor;
  };
  std::vector<Entry> entries;
  const auto slots = t.slots();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (std::size_t a = 0; a < slots[s].values.size(); ++a) {
      const double e = std::norm(slots[s].values[a]);
      if (e > 0) entries.push_back({e / slots[s].geometry.measure, s, a});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& x, const Entry& y) { return x.density > y.density; });
  auto rect_of = [&](const Entry& e) {
    const ScaleSlot& s = slots[e.slot];
    return rectangle_at(grid, s.geometry, s.j, s.k, t.N(), e.anchor);
  };
  std::vector<OpenSetApprox> out;
  if (entries.empty()) {
    const ScaleSlot& s = slots.front();
    out.push_back(OpenSetApprox::from_rectangles(grid, {rectangle_at(grid, s.geometry, s.j, s.k, t.N(), 0)}));
    return out;
  }
  auto push = [&](OpenSetApprox&& c) {
    if (out.size() >= budget) return;
    for (const auto& o : out) {
      if (std::equal(o.mask().begin(), o.mask().end(), c.mask().begin())) return;
    }
    out.push_back(std::move(c));
  };
  push(OpenSetApprox::from_rectangles(grid, {rect_of(entries.front())}));
  const std::size_t quota = std::max<std::size_t>(1, budget / 3);
  // Greedy unions of the densest rectangles, doubling the prefix length.
  {
    std::size_t added = 0;
    for (std::size_t len = 2; len <= entries.size() && added < quota; len *= 2) {
      std::vector<DyadicRectangle> rects;
      for (std::size_t i = 0; i < len; ++i) rects.push_back(rect_of(entries[i]));
      const std::size_t before = out.size();
      push(OpenSetApprox::from_rectangles(grid, std::move(rects)));
      added += out.size() - before;
    }
  }
  // Level sets of the discrete square function on a geometric ladder.
  {
    const SampledFunction g = g_flag_discrete(t);
    double peak = 0;
    for (const cplx& v : g.values()) peak = std::max(peak, v.real());
    std::size_t added = 0;
    for (int i = 1; i <= 40 && added < quota; ++i) {
      const double lambda = peak * std::ldexp(1.0, -i);
      std::vector<char> mask(grid.size());
      bool any = false;
      for (std::size_t x = 0; x < mask.size(); ++x) {
        mask[x] = g[x].real() > lambda;
        any = any || mask[x];
      }
      if (!any) continue;
      const std::size_t before = out.size();
      push(OpenSetApprox::from_mask(grid, std::move(mask), t.N()));
      added += out.size() - before;
    }
  }
  for (std::size_t i = 1; i < entries.size() && out.size() < budget; ++i) {
    push(OpenSetApprox::from_rectangles(grid, {rect_of(entries[i])}));
  }
  return out;
}

std::string candidates_to_json(std::span<const OpenSetApprox> candidates) {
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    const Grid& g = c.grid();
    nlohmann::ordered_json set = nlohmann::ordered_json::array();
    for (const auto& r : c.rectangles()) {
      nlohmann::ordered_json e;
      e["j"] = r.j;
      e["k"] = r.k;
      e["iIdx"] = std::vector<std::int64_t>(r.iIdx.begin(), r.iIdx.begin() + g.n());
      e["jIdx"] = std::vector<std::int64_t>(r.jIdx.begin(), r.jIdx.begin() + g.m());
      e["N"] = r.N;
      set.push_back(std::move(e));
    }
    all.push_back(std::move(set));
  }
  return all.dump();
}

std::vector<OpenSetApprox> candidates_from_json(const Grid& grid, const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("candidate file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("candidate file must hold a list of rectangle lists");
  std::vector<OpenSetApprox> out;
  for (const auto& set : doc) {
    std::vector<DyadicRectangle> rects;
    for (const auto& e : set) {
      DyadicRectangle r;
      try {
        r.j = e.at("j").get<int>();
        r.k = e.at("k").get<int>();
        r.N = e.at("N").get<int>();
        const auto i = e.at("iIdx").get<std::vector<std::int64_t>>();
        const auto j = e.at("jIdx").get<std::vector<std::int64_t>>();
        if (i.size() != static_cast<std::size_t>(grid.n()) || j.size() != static_cast<std::size_t>(grid.m())) {
          throw ConfigError("rectangle index has the wrong dimension");
        }
        std::copy(i.begin(), i.end(), r.iIdx.begin());
        std::copy(j.begin(), j.end(), r.jIdx.begin());
      } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed rectangle entry: ") + ex.what());
      }
      rects.push_back(r);
    }
    out.push_back(OpenSetApprox::from_rectangles(grid, std::move(rects)));
  }
  return out;
}

}  // namespace flaglp
