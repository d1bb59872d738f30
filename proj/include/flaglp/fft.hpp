#pragma once

#include <span>
#include <vector>

#include "flaglp/grid.hpp"

namespace flaglp {

/// Unnormalized forward DFT over the full grid (exponent sign -1).
std::vector<cplx> fft_forward(const Grid& grid, std::span<const cplx> in);
/// Inverse DFT over the full grid, normalized by 1/size.
std::vector<cplx> fft_inverse(const Grid& grid, std::span<const cplx> in);

/// Multi-dimensional DFT of a row-major array of the given shape. `sign` is
/// -1 (forward) or +1 (backward); backward output is scaled by 1/size when
/// `normalize` is set.
std::vector<cplx> fft_nd(std::span<const int> shape, std::span<const cplx> in, int sign,
                         bool normalize);

/// IFFT(multiplier .* FFT(f)) for a real frequency-domain multiplier laid out
/// in FFT bin order.
std::vector<cplx> apply_multiplier(const Grid& grid, std::span<const cplx> f,
                                   std::span<const double> multiplier);

}  // namespace flaglp
