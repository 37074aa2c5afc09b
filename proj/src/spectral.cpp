#include "ards/spectral.hpp"

#include "ards/error.hpp"
#include "ards/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ards {

namespace {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 Cooley-Tukey; size must be a power of two.
void fft_radix2(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) return;

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle =
            (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const Complex wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                Complex u = a[i + k];
                Complex v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Bluestein's chirp-z transform for arbitrary sizes, built on radix-2
// convolution.  Unnormalized, matching fft_radix2.
void fft_bluestein(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_power_of_two(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    // chirp[k] = exp(sign * i * pi * k^2 / n); k^2 reduced mod 2n keeps the
    // angle argument small and exact in double
    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) %
                           (2 * static_cast<std::uint64_t>(n));
        double angle = sign * std::numbers::pi * static_cast<double>(k2) /
                       static_cast<double>(n);
        chirp[k] = Complex(std::cos(angle), std::sin(angle));
    }

    std::vector<Complex> fa(m, Complex(0.0, 0.0));
    std::vector<Complex> fb(m, Complex(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        fb[k] = fb[m - k] = std::conj(chirp[k]);
    }

    fft_radix2(fa, false);
    fft_radix2(fb, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_radix2(fa, true);

    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) {
        a[k] = fa[k] * inv_m * chirp[k];
    }
}

}  // namespace

void fft_inplace(std::vector<Complex>& data, bool inverse) {
    if (data.empty()) return;
    if (is_power_of_two(data.size())) {
        fft_radix2(data, inverse);
    } else {
        fft_bluestein(data, inverse);
    }
}

double Spectrum::bin_resolution_hz() const {
    return static_cast<double>(kSampleRateHz) / static_cast<double>(bins.size());
}

double Spectrum::frequency_hz(std::size_t bin) const {
    const std::size_t n = bins.size();
    const double res = bin_resolution_hz();
    if (bin <= n / 2) return static_cast<double>(bin) * res;
    return (static_cast<double>(bin) - static_cast<double>(n)) * res;
}

Spectrum dft(const std::vector<double>& values) {
    Spectrum spectrum;
    spectrum.bins.reserve(values.size());
    for (double v : values) spectrum.bins.emplace_back(v, 0.0);
    fft_inplace(spectrum.bins, false);
    return spectrum;
}

std::vector<double> idft(const Spectrum& spectrum, double* max_residue_out) {
    const std::size_t n = spectrum.bins.size();
    double max_bin = 0.0;
    for (const auto& b : spectrum.bins) max_bin = std::max(max_bin, std::abs(b));

    std::vector<Complex> work = spectrum.bins;
    fft_inplace(work, true);

    std::vector<double> out(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    double max_residue = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        work[i] *= inv_n;
        out[i] = work[i].real();
        max_residue = std::max(max_residue, std::fabs(work[i].imag()));
    }
    if (max_residue_out != nullptr) *max_residue_out = max_residue;
    // The absolute floor keeps numerically-silent spectra (every surviving
    // bin is rounding noise after an ablation removed all signal) from
    // tripping a check meant for structural symmetry violations.
    const double tolerance = 1e-6 * max_bin + 1e-9;
    if (max_residue > tolerance) {
        throw ImaginaryResidueExceeded(
            "inverse transform imaginary residue " + std::to_string(max_residue) +
            " exceeds 1e-6 * max |bin| + 1e-9 = " + std::to_string(tolerance));
    }
    return out;
}

std::vector<double> band_ablate(const std::vector<double>& values,
                                const AblationBand& band) {
    if (band.low_hz < 0.0 || band.low_hz > band.high_hz) {
        throw ConfigInvalid("ablation band requires 0 <= low_hz <= high_hz");
    }
    Spectrum spectrum = dft(values);
    const std::size_t n = spectrum.bins.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0) {
            if (!band.keep_dc) spectrum.bins[k] = Complex(0.0, 0.0);
            continue;
        }
        double f = std::fabs(spectrum.frequency_hz(k));
        if (f < band.low_hz || f > band.high_hz) {
            spectrum.bins[k] = Complex(0.0, 0.0);
        }
    }
    return idft(spectrum);
}

std::vector<double> lowpass_ablate(const std::vector<double>& values, double cutoff_hz) {
    return band_ablate(values, AblationBand{0.0, cutoff_hz, true});
}

std::vector<double> spectral_input(const std::vector<double>& values) {
    Spectrum spectrum = dft(values);
    const std::size_t n = spectrum.bins.size();
    const std::size_t center = n / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::abs(spectrum.bins[(i + n - center) % n]);
    }
    return out;
}

double centered_position_frequency_hz(std::size_t position, std::size_t n) {
    const double res = static_cast<double>(kSampleRateHz) / static_cast<double>(n);
    return (static_cast<double>(position) - static_cast<double>(n / 2)) * res;
}

}  // namespace ards
