#include "flaglp/squarefuncs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/parallel.hpp"

namespace flaglp {

namespace {

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

SampledFunction from_real(const Grid& grid, const std::vector<double>& v) {
  std::vector<cplx> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(v[i]);
  return SampledFunction(grid, std::move(out));
}

}  // namespace

SampledFunction g_flag(const SampledFunction& f, const FilterBank& bank) {
  check_grid(f, bank);
  const Grid& grid = f.grid();
  const auto spec = fft_forward(grid, f.values());
  const auto channels = live_channels(bank);
  std::vector<std::vector<double>> partial(channels.size());
  parallel_for(channels.size(), [&](std::size_t c) {
    const auto conv = channel_from_spectrum(bank, spec, channels[c].j, channels[c].k);
    partial[c].resize(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) partial[c][i] = std::norm(conv[i]);
  });
  std::vector<double> total(grid.size(), 0.0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return from_real(grid, total);
}

SampledFunction g_flag_discrete(const CoefficientField& coeffs) {
  const Grid& grid = coeffs.grid();
  std::vector<double> total(grid.size(), 0.0);
  for (const ScaleSlot& slot : coeffs.slots()) {
    bool any = false;
    for (const cplx& v : slot.values) any = any || v != 0.0;
    if (!any) continue;
    for (std::size_t i = 0; i < total.size(); ++i) {
      total[i] += std::norm(slot.values[anchor_index(grid, slot.geometry, i)]);
    }
  }
  return from_real(grid, total);
}

double hardy_norm(const SampledFunction& f, const FilterBank& bank, double p, int N) {
  if (!(p > 0) || p > 1) throw DomainError("hardy_norm needs p in (0, 1]");
  return lp_norm(g_flag_discrete(analyze(f, bank, N)), p);
}

double hardy_type_norm(const SampledFunction& f, const FilterBank& bank, double p, int N) {
  if (p > 1) return lp_norm(f, p);
  return hardy_norm(f, bank, p, N);
}

SampledFunction cell_square_function(const SampledFunction& f, const FilterBank& bank, int N,
                                     CellStatistic statistic) {
  check_grid(f, bank);
  const Grid& grid = f.grid();
  const auto spec = fft_forward(grid, f.values());
  const auto channels = live_channels(bank);
  std::vector<std::vector<double>> partial(channels.size());
  parallel_for(channels.size(), [&](std::size_t c) {
    const auto conv = channel_from_spectrum(bank, spec, channels[c].j, channels[c].k);
    const ScaleGeometry geom = scale_geometry(grid, channels[c].j, channels[c].k, N);
    std::vector<double> cell;
    if (statistic == CellStatistic::Anchor) {
      cell.resize(geom.anchorCount);
      for (std::size_t a = 0; a < geom.anchorCount; ++a) cell[a] = std::abs(conv[anchor_to_grid(grid, geom, a)]);
    } else {
      const bool sup = statistic == CellStatistic::Sup;
      cell.assign(geom.anchorCount, sup ? 0.0 : std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < conv.size(); ++i) {
        double& v = cell[anchor_index(grid, geom, i)];
        v = sup ? std::max(v, std::abs(conv[i])) : std::min(v, std::abs(conv[i]));
      }
    }
    partial[c].resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = cell[anchor_index(grid, geom, i)];
      partial[c][i] = v * v;
    }
  });
  std::vector<double> total(grid.size(), 0.0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return from_real(grid, total);
}

PPReport pp_compare(const SampledFunction& f, const FilterBank& bankA, const FilterBank& bankB, double p,
                    int N) {
  check_grid(f, bankA);
  check_grid(f, bankB);
  PPReport r;
  r.p = p;
  r.bankA = bankA.id();
  r.bankB = bankB.id();
  r.supNorm = lp_norm(cell_square_function(f, bankA, N, CellStatistic::Sup), p);
  r.infNorm = lp_norm(cell_square_function(f, bankB, N, CellStatistic::Inf), p);
  if (r.supNorm == 0 && r.infNorm == 0) {
    r.ratio = 1;
    r.degenerate = true;
  } else {
    r.ratio = r.infNorm == 0 ? std::numeric_limits<double>::infinity() : r.supNorm / r.infNorm;
  }
  return r;
}

}  // namespace flaglp
