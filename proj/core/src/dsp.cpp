#include "arbiter/dsp.hpp"

#include <cmath>
#include <numbers>

#include "arbiter/errors.hpp"

namespace arbiter::dsp {

namespace {
constexpr double kPi = std::numbers::pi;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0) return;
    if ((n & (n - 1)) != 0) throw Error("fft_inplace: length must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& c : a) c *= inv_n;
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::vector<double> convolve_fft(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t n = next_pow2(out_len);

    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
    fft_inplace(fa, false);
    fft_inplace(fb, false);
    for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
    fft_inplace(fa, true);

    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
    return out;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                     static_cast<double>(n)));
    }
    return w;
}

std::vector<double> resample_sinc(const std::vector<double>& x,
                                  double in_rate, double out_rate,
                                  int half_width) {
    if (in_rate <= 0.0 || out_rate <= 0.0) throw Error("resample_sinc: rates must be positive");
    if (x.empty()) return {};
    if (in_rate == out_rate) return x;

    const double ratio = out_rate / in_rate;
    const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * ratio));
    // Low-pass at the narrower of the two Nyquists.
    const double cutoff = std::min(1.0, ratio);

    std::vector<double> out(out_len, 0.0);
    const auto n_in = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t m = 0; m < out_len; ++m) {
        const double t = static_cast<double>(m) / ratio;
        const auto center = static_cast<std::ptrdiff_t>(std::floor(t));
        double acc = 0.0;
        for (std::ptrdiff_t k = center - half_width; k <= center + half_width + 1; ++k) {
            if (k < 0 || k >= n_in) continue;
            const double d = t - static_cast<double>(k);
            const double u = d / (half_width + 1.0);
            if (u <= -1.0 || u >= 1.0) continue;
            const double win = 0.5 * (1.0 + std::cos(kPi * u));
            acc += x[static_cast<std::size_t>(k)] * cutoff * sinc(kPi * cutoff * d) * win;
        }
        out[m] = acc;
    }
    return out;
}

std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   std::size_t fft_size) {
    if ((fft_size & (fft_size - 1)) != 0) throw Error("power_spectrum: fft_size must be a power of two");
    if (frame.size() > fft_size) throw Error("power_spectrum: frame longer than fft_size");
    std::vector<std::complex<double>> buf(fft_size);
    for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
    fft_inplace(buf, false);
    std::vector<double> p(fft_size / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(buf[k]);
    return p;
}

} // namespace arbiter::dsp
