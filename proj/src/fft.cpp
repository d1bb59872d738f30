#include "flaglp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "flaglp/error.hpp"

namespace flaglp {

namespace {

// Plans are created once per (shape, sign) under a lock and executed
// concurrently through the new-array interface.
class PlanCache {
 public:
  fftw_plan get(const std::vector<int>& shape, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(shape, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::size_t total = 1;
    for (int s : shape) total *= static_cast<std::size_t>(s);
    auto* buf = fftw_alloc_complex(total);
    fftw_plan p = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), buf, buf,
                                sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (!p) throw ConfigError("FFTW could not plan the transform");
    plans_.emplace(key, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::vector<int>, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

std::vector<int> grid_shape(const Grid& grid) {
  return std::vector<int>(static_cast<std::size_t>(grid.dims()), static_cast<int>(grid.side()));
}

}  // namespace

std::vector<cplx> fft_nd(std::span<const int> shape, std::span<const cplx> in, int sign,
                         bool normalize) {
  std::vector<int> s(shape.begin(), shape.end());
  std::size_t total = 1;
  for (int v : s) total *= static_cast<std::size_t>(v);
  if (total != in.size()) throw ShapeError("FFT input does not match its shape");
  std::vector<cplx> out(in.begin(), in.end());
  if (s.empty()) return out;
  fftw_plan p = cache().get(s, sign);
  auto* data = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(p, data, data);
  if (normalize && sign > 0) {
    const double scale = 1.0 / static_cast<double>(total);
    for (cplx& v : out) v *= scale;
  }
  return out;
}

std::vector<cplx> fft_forward(const Grid& grid, std::span<const cplx> in) {
  const auto s = grid_shape(grid);
  return fft_nd(s, in, -1, false);
}

std::vector<cplx> fft_inverse(const Grid& grid, std::span<const cplx> in) {
  const auto s = grid_shape(grid);
  return fft_nd(s, in, +1, true);
}

std::vector<cplx> apply_multiplier(const Grid& grid, std::span<const cplx> f,
                                   std::span<const double> multiplier) {
  if (multiplier.size() != grid.size() || f.size() != grid.size()) {
    throw ShapeError("multiplier does not match grid");
  }
  std::vector<cplx> spec = fft_forward(grid, f);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= multiplier[i];
  return fft_inverse(grid, spec);
}

}  // namespace flaglp
