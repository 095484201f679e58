#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace arbiter::dsp {

/// In-place iterative radix-2 FFT. Length must be a power of two.
/// Inverse transform includes the 1/N scaling.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// Full linear convolution via FFT, output length |a| + |b| - 1.
std::vector<double> convolve_fft(const std::vector<double>& a,
                                 const std::vector<double>& b);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// sin(x)/x with the removable singularity handled.
inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    return std::sin(x) / x;
}

/// Windowed-sinc resampler. Output length = round(n * out_rate / in_rate).
std::vector<double> resample_sinc(const std::vector<double>& x,
                                  double in_rate, double out_rate,
                                  int half_width = 32);

/// Power spectrum magnitude-squared of the first fft_size/2 + 1 bins.
/// Input shorter than fft_size is zero-padded.
std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   std::size_t fft_size);

} // namespace arbiter::dsp
