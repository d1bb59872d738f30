#include "flaglp/filters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/io.hpp"
#include "json.hpp"

namespace flaglp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double transition_weight(double t, double s) {
  return t <= 0 ? 0.0 : std::exp(-1.0 / std::pow(t, s));
}

// Angular frequency magnitude |xi| over axes [first, last) of a full-grid bin.
double angular_radius(const Grid& grid, std::size_t flat, int first, int last) {
  const Coords c = grid.coords(flat);
  double r2 = 0;
  for (int a = first; a < last; ++a) {
    const double q = static_cast<double>(grid.frequency(c[a]));
    r2 += q * q;
  }
  return kTwoPi * std::sqrt(r2);
}

// Same on the m-dimensional second-factor lattice.
double second_radius(const Grid& grid, std::size_t idx) {
  double r2 = 0;
  for (int a = 0; a < grid.m(); ++a) {
    const auto bin = static_cast<std::int64_t>((idx >> (grid.L() * (grid.m() - 1 - a))) & (grid.side() - 1));
    const double q = static_cast<double>(grid.frequency(bin));
    r2 += q * q;
  }
  return kTwoPi * std::sqrt(r2);
}

std::vector<double> all_radii1(const Grid& grid) {
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = angular_radius(grid, i, 0, grid.dims());
  return r;
}

std::vector<double> all_radii2(const Grid& grid) {
  std::vector<double> r(grid.second_factor_size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = second_radius(grid, i);
  return r;
}

// psi_j^2 = chi(2^-j r) - chi(2^-j+1 r) on the annulus family.
std::vector<double> annulus_filter(const std::vector<double>& radii, const FilterProfile& p, int j) {
  const double lo = 2 * p.innerRadius;
  const double hi = p.outerRadius;
  std::vector<double> out(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double a = smooth_cutoff(std::ldexp(radii[i], -j), lo, hi, p.smoothness);
    const double b = smooth_cutoff(std::ldexp(radii[i], 1 - j), lo, hi, p.smoothness);
    out[i] = std::sqrt(std::max(0.0, a - b));
  }
  return out;
}

// 1 - sum_{j in range} psi_j^2, in closed form.
std::vector<double> annulus_low_pass(const std::vector<double>& radii, const FilterProfile& p,
                                     ScaleRange range) {
  const double lo = 2 * p.innerRadius;
  const double hi = p.outerRadius;
  std::vector<double> out(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double low = smooth_cutoff(std::ldexp(radii[i], 1 - range.lo), lo, hi, p.smoothness);
    const double top = smooth_cutoff(std::ldexp(radii[i], -range.hi), lo, hi, p.smoothness);
    out[i] = std::sqrt(std::max(0.0, low + 1.0 - top));
  }
  return out;
}

double partition_residual(const std::vector<std::vector<double>>& psi, const std::vector<double>& lp) {
  double worst = 0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    double s = lp[i] * lp[i];
    for (const auto& f : psi) s += f[i] * f[i];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

std::vector<double> square_sum(const std::vector<std::vector<double>>& psi, std::size_t size) {
  std::vector<double> s(size, 0.0);
  for (const auto& f : psi) {
    for (std::size_t i = 0; i < size; ++i) s[i] += f[i] * f[i];
  }
  return s;
}

void fill_flag_low_pass(FilterBank& bank, const Grid& grid, const std::vector<double>& p1,
                        const std::vector<double>& p2, std::vector<double>& out) {
  (void)bank;
  out.resize(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::sqrt(std::max(0.0, 1.0 - p1[i] * p2[grid.second_factor_index(i)]));
  }
}

std::vector<char> zero_channels(const Grid& grid, const std::vector<std::vector<double>>& psi1,
                                const std::vector<std::vector<double>>& psi2) {
  std::vector<char> zero(psi1.size() * psi2.size(), 1);
  for (std::size_t a = 0; a < psi1.size(); ++a) {
    for (std::size_t b = 0; b < psi2.size(); ++b) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (psi1[a][i] * psi2[b][grid.second_factor_index(i)] != 0.0) {
          zero[a * psi2.size() + b] = 0;
          break;
        }
      }
    }
  }
  return zero;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

void validate_profile(const FilterProfile& p) {
  if (!(p.innerRadius > 0) || !(p.outerRadius > p.innerRadius)) {
    throw ConfigError("filter radii must satisfy 0 < inner < outer");
  }
  if (!(p.outerRadius > 2 * p.innerRadius) || p.outerRadius > 4 * p.innerRadius) {
    throw ConfigError("annulus profile needs 2*inner < outer <= 4*inner");
  }
  if (!(p.smoothness > 0)) throw ConfigError("smoothness must be positive");
  if (p.momentOrder < 1) throw ConfigError("moment order must be at least 1");
}

double smooth_cutoff(double r, double lo, double hi, double smoothness) {
  if (r <= lo) return 1.0;
  if (r >= hi) return 0.0;
  const double t = (r - lo) / (hi - lo);
  const double a = transition_weight(1.0 - t, smoothness);
  const double b = transition_weight(t, smoothness);
  return a / (a + b);
}

std::span<const double> FilterBank::psi1_hat(int j) const {
  if (!jRange_.contains(j)) throw RangeError("first-factor scale " + std::to_string(j) + " outside the bank");
  return psi1_[static_cast<std::size_t>(j - jRange_.lo)];
}

std::span<const double> FilterBank::psi2_hat(int k) const {
  if (!kRange_.contains(k)) throw RangeError("second-factor scale " + std::to_string(k) + " outside the bank");
  return psi2_[static_cast<std::size_t>(k - kRange_.lo)];
}

std::span<const double> FilterBank::compact_psi1(int j) const {
  if (compact1_.empty()) return {};
  if (!jRange_.contains(j)) throw RangeError("first-factor scale outside the bank");
  return compact1_[static_cast<std::size_t>(j - jRange_.lo)];
}

std::span<const double> FilterBank::compact_psi2(int k) const {
  if (compact2_.empty()) return {};
  if (!kRange_.contains(k)) throw RangeError("second-factor scale outside the bank");
  return compact2_[static_cast<std::size_t>(k - kRange_.lo)];
}

bool FilterBank::channel_is_zero(int j, int k) const {
  if (!jRange_.contains(j) || !kRange_.contains(k)) throw RangeError("channel outside the bank");
  return channelZero_[static_cast<std::size_t>((j - jRange_.lo) * kRange_.count() + (k - kRange_.lo))] != 0;
}

std::string FilterBank::id() const {
  std::string s;
  if (mode() == FilterMode::FrequencyAnnulus) {
    s = "annulus(inner=" + format_number(profile_.innerRadius) +
        ",outer=" + format_number(profile_.outerRadius) +
        ",s=" + format_number(profile_.smoothness) + ")";
  } else {
    s = "compact(M0=" + std::to_string(profile_.momentOrder) + ")";
  }
  return s + "@L" + std::to_string(grid_.L()) + "N" + std::to_string(N_);
}

FilterBank build_filter_bank(const Grid& grid, const FilterProfile& profile, int N) {
  validate_profile(profile);
  if (profile.mode != FilterMode::FrequencyAnnulus) {
    throw ConfigError("build_filter_bank builds annulus banks; use build_compact_bank");
  }
  if (N < 1) throw ConfigError("offset N must be at least 1");
  const int top = grid.L() - N - 1;
  if (top < 0) {
    throw ResolutionError("grid 2^" + std::to_string(grid.L()) + " too coarse for N=" + std::to_string(N));
  }
  FilterBank bank;
  bank.grid_ = grid;
  bank.profile_ = profile;
  bank.N_ = N;
  bank.jRange_ = {0, top};
  bank.kRange_ = {0, top};
  const auto r1 = all_radii1(grid);
  const auto r2 = all_radii2(grid);
  for (int j = 0; j <= top; ++j) bank.psi1_.push_back(annulus_filter(r1, profile, j));
  for (int k = 0; k <= top; ++k) bank.psi2_.push_back(annulus_filter(r2, profile, k));
  bank.lowPass1_ = annulus_low_pass(r1, profile, bank.jRange_);
  bank.lowPass2_ = annulus_low_pass(r2, profile, bank.kRange_);
  bank.residual1_ = partition_residual(bank.psi1_, bank.lowPass1_);
  bank.residual2_ = partition_residual(bank.psi2_, bank.lowPass2_);
  fill_flag_low_pass(bank, grid, square_sum(bank.psi1_, grid.size()),
                     square_sum(bank.psi2_, grid.second_factor_size()), bank.lowPass_);
  bank.channelZero_ = zero_channels(grid, bank.psi1_, bank.psi2_);
  return bank;
}

namespace {

double unit_bump(double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; }

// Minimal-image coordinate of lattice index c along one axis.
double torus_coordinate(std::int64_t c, std::size_t side, double h) {
  const auto s = static_cast<std::int64_t>(side);
  return static_cast<double>(c < s / 2 ? c : c - s) * h;
}

// Periodic (-Delta_h) on a d-dimensional cube lattice with `side` points.
std::vector<double> neg_laplacian(const std::vector<double>& f, int d, int L, double h) {
  const std::size_t side = std::size_t{1} << L;
  std::vector<double> out(f.size(), 0.0);
  const double inv = 1.0 / (h * h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double acc = 2.0 * d * f[i];
    for (int a = 0; a < d; ++a) {
      const int shift = L * (d - 1 - a);
      const std::size_t c = (i >> shift) & (side - 1);
      const std::size_t base = i - (c << shift);
      acc -= f[base + (((c + 1) & (side - 1)) << shift)];
      acc -= f[base + (((c + side - 1) & (side - 1)) << shift)];
    }
    out[i] = acc * inv;
  }
  return out;
}

std::vector<double> compact_generator(int d, int L, int j, int K) {
  const std::size_t side = std::size_t{1} << L;
  const double h = std::ldexp(1.0, -L);
  const double rho = 1.0 - K * h * std::ldexp(1.0, j);
  const std::size_t total = std::size_t{1} << (L * d);
  std::vector<double> g(total);
  const double amp = std::ldexp(1.0, j * d);
  for (std::size_t i = 0; i < total; ++i) {
    double r2 = 0;
    for (int a = 0; a < d; ++a) {
      const auto c = static_cast<std::int64_t>((i >> (L * (d - 1 - a))) & (side - 1));
      const double x = torus_coordinate(c, side, h);
      r2 += x * x;
    }
    g[i] = amp * unit_bump(std::ldexp(std::sqrt(r2), j) / rho);
  }
  for (int t = 0; t < K; ++t) g = neg_laplacian(g, d, L, h);
  const double scale = std::ldexp(1.0, -2 * j * K);
  for (double& v : g) v *= scale;
  return g;
}

std::vector<double> real_response(const std::vector<double>& spatial, int d, int L) {
  std::vector<int> shape(static_cast<std::size_t>(d), 1 << L);
  std::vector<cplx> in(spatial.begin(), spatial.end());
  const auto spec = fft_nd(shape, in, -1, false);
  const double vol = std::ldexp(1.0, -L * d);
  std::vector<double> out(spec.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real() * vol;
  return out;
}

// Scales the family so that max sum_j psi_j^2 is 1; returns the band residual.
double normalize_family(std::vector<std::vector<double>>& hats, std::vector<std::vector<double>>& spatial,
                        const std::vector<double>& radii, ScaleRange range, std::vector<double>& lowPass) {
  const auto P = square_sum(hats, radii.size());
  const double peak = *std::max_element(P.begin(), P.end());
  const double c = 1.0 / std::sqrt(peak);
  for (auto& h : hats) for (double& v : h) v *= c;
  for (auto& s : spatial) for (double& v : s) v *= c;
  lowPass.resize(radii.size());
  double residual = 0;
  const double lo = std::ldexp(1.0, range.lo);
  const double hi = std::ldexp(1.0, range.hi);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double p = P[i] * c * c;
    lowPass[i] = std::sqrt(std::max(0.0, 1.0 - p));
    if (radii[i] >= lo && radii[i] <= hi) residual = std::max(residual, std::abs(1.0 - p));
  }
  return residual;
}

}  // namespace

FilterBank build_compact_bank(const Grid& grid, int M0, int N) {
  if (M0 < 1) throw ConfigError("moment order M0 must be at least 1");
  if (N < 1) throw ConfigError("offset N must be at least 1");
  const int K = (M0 + 2) / 2;  // ceil((M0 + 1) / 2)
  const int top = grid.L() - N - 1;
  if (top < 2) {
    throw ResolutionError("compact bank needs L - N - 1 >= 2; grid 2^" + std::to_string(grid.L()) +
                          " with N=" + std::to_string(N) + " is too coarse");
  }
  if ((std::size_t{1} << (N + 1)) < static_cast<std::size_t>(2 * K)) {
    throw ResolutionError("finest compact filter is unresolved: need 2^(N+1) >= " + std::to_string(2 * K));
  }
  FilterBank bank;
  bank.grid_ = grid;
  bank.profile_.mode = FilterMode::CompactSpatial;
  bank.profile_.momentOrder = M0;
  bank.N_ = N;
  bank.jRange_ = {2, top};
  bank.kRange_ = {2, top};
  bank.momentOrder_ = M0;
  for (int j = 2; j <= top; ++j) {
    bank.compact1_.push_back(compact_generator(grid.dims(), grid.L(), j, K));
    bank.psi1_.push_back(real_response(bank.compact1_.back(), grid.dims(), grid.L()));
    bank.compact2_.push_back(compact_generator(grid.m(), grid.L(), j, K));
    bank.psi2_.push_back(real_response(bank.compact2_.back(), grid.m(), grid.L()));
  }
  bank.residual1_ = normalize_family(bank.psi1_, bank.compact1_, all_radii1(grid), bank.jRange_, bank.lowPass1_);
  bank.residual2_ = normalize_family(bank.psi2_, bank.compact2_, all_radii2(grid), bank.kRange_, bank.lowPass2_);
  fill_flag_low_pass(bank, grid, square_sum(bank.psi1_, grid.size()),
                     square_sum(bank.psi2_, grid.second_factor_size()), bank.lowPass_);
  bank.channelZero_ = zero_channels(grid, bank.psi1_, bank.psi2_);
  return bank;
}

std::vector<double> lift_flag_filter(const FilterBank& bank, int j, int k) {
  const auto a = bank.psi1_hat(j);
  const auto b = bank.psi2_hat(k);
  const Grid& grid = bank.grid();
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[grid.second_factor_index(i)];
  return out;
}

std::vector<double> filter_spatial(const Grid& grid, std::span<const double> response) {
  if (response.size() != grid.size()) throw ShapeError("response does not match grid");
  std::vector<cplx> in(response.begin(), response.end());
  const auto x = fft_nd(std::vector<int>(static_cast<std::size_t>(grid.dims()), static_cast<int>(grid.side())),
                        in, +1, false);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i].real();
  return out;
}

std::vector<double> second_factor_spatial(const Grid& grid, std::span<const double> response) {
  if (response.size() != grid.second_factor_size()) throw ShapeError("response does not match factor");
  std::vector<cplx> in(response.begin(), response.end());
  const auto x = fft_nd(std::vector<int>(static_cast<std::size_t>(grid.m()), static_cast<int>(grid.side())),
                        in, +1, false);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i].real();
  return out;
}

void export_bank(const FilterBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Grid& g = bank.grid();
  nlohmann::ordered_json manifest;
  manifest["bank"] = bank.id();
  manifest["n"] = g.n();
  manifest["m"] = g.m();
  manifest["L"] = g.L();
  manifest["N"] = bank.N();
  manifest["jRange"] = {bank.j_range().lo, bank.j_range().hi};
  manifest["kRange"] = {bank.k_range().lo, bank.k_range().hi};
  manifest["calderonResidual1"] = bank.calderon_residual1();
  manifest["calderonResidual2"] = bank.calderon_residual2();
  nlohmann::ordered_json filters = nlohmann::ordered_json::array();
  auto emit = [&](const std::string& file, std::span<const double> resp, bool second,
                  nlohmann::ordered_json entry) {
    std::vector<cplx> v(resp.begin(), resp.end());
    BlockHeader h;
    h.n = second ? 0 : static_cast<std::uint8_t>(g.n());
    h.m = static_cast<std::uint8_t>(g.m());
    h.L = static_cast<std::uint8_t>(g.L());
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    write_block(out, h, v);
    entry["file"] = file;
    filters.push_back(std::move(entry));
  };
  for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
    emit("psi1_j" + std::to_string(j) + ".bin", bank.psi1_hat(j), false,
         {{"factor", 1}, {"j", j}, {"offsets", {g.n() + g.m()}}});
  }
  for (int k = bank.k_range().lo; k <= bank.k_range().hi; ++k) {
    emit("psi2_k" + std::to_string(k) + ".bin", bank.psi2_hat(k), true,
         {{"factor", 2}, {"k", k}, {"offsets", {g.m()}}});
  }
  emit("lowpass.bin", bank.low_pass_hat(), false, {{"factor", 0}, {"lowPass", true}});
  manifest["filters"] = std::move(filters);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace flaglp
