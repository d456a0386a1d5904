#pragma once

#include <complex>
#include <span>
#include <vector>

namespace sei::fft {

using cplx = std::complex<double>;

/// Unnormalized forward DFT: X[k] = sum_t x[t] exp(-2 pi i k t / N).
std::vector<cplx> forward(std::span<const cplx> x);

/// Inverse DFT including the 1/N factor, so inverse(forward(x)) == x.
std::vector<cplx> inverse(std::span<const cplx> x);

}  // namespace sei::fft
