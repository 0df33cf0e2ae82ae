#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace spectropitch {

// In-place iterative radix-2 FFT. Size must be a power of two. The inverse
// transform includes the 1/N scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

std::size_t next_pow2(std::size_t n);

// Magnitudes of bins 0..n/2 for a real frame zero-padded to fft_size.
std::vector<double> real_fft_magnitude(const std::vector<double>& frame, std::size_t fft_size);

}  // namespace spectropitch
