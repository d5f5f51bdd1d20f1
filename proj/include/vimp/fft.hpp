#pragma once

#include <complex>
#include <vector>

#include "vimp/common.hpp"

namespace vimp::dsp {

// In-place iterative radix-2 FFT. Size must be a power of two. The inverse
// transform includes the 1/N scaling.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

}  // namespace vimp::dsp
