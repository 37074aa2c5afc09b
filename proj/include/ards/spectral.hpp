#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ards {

// Two-sided DFT of a flow slice, standard bin order: bin 0 is DC, bins k and
// N-k are conjugate-symmetric for real input.
struct Spectrum {
    std::vector<std::complex<double>> bins;

    std::size_t size() const { return bins.size(); }
    double bin_resolution_hz() const;  // sample_rate / N

    // k -> k*(fs/N) Hz for k <= N/2, else (k-N)*(fs/N)
    double frequency_hz(std::size_t bin) const;
};

// Passband for brick-wall ablation.  A bin survives iff low_hz <= |f| <= high_hz
// (inclusive endpoints); the DC bin is governed solely by keep_dc.
struct AblationBand {
    double low_hz = 0.0;
    double high_hz = 25.0;
    bool keep_dc = true;
};

// In-place transform, unnormalized in both directions.  Radix-2 for powers of
// two, Bluestein's chirp-z otherwise, so any length is supported.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);

// Unnormalized forward transform: bins[k] = sum_n values[n]*exp(-2*pi*i*k*n/N).
Spectrum dft(const std::vector<double>& values);

// Inverse with 1/N normalization; returns the real part.  Throws
// ImaginaryResidueExceeded when max |imag| > 1e-6 * max |bin| + 1e-9, which
// signals a symmetry-breaking filter bug; the absolute floor exempts spectra
// whose only content is rounding noise.  max_residue_out, when given,
// receives the largest imaginary magnitude seen.
std::vector<double> idft(const Spectrum& spectrum, double* max_residue_out = nullptr);

// Zeroes all coefficients outside the passband (bin k and N-k fall together
// since they share |f|) and reconstructs the time-domain signal.
std::vector<double> band_ablate(const std::vector<double>& values,
                                const AblationBand& band);

// Lowpass [0, cutoff] with DC retained.
std::vector<double> lowpass_ablate(const std::vector<double>& values, double cutoff_hz);

// Two-sided magnitude spectrum reordered DC-centered (-25 Hz .. +25 Hz left to
// right), same length as the input so the model input shape is unchanged.
std::vector<double> spectral_input(const std::vector<double>& values);

// Frequency at a DC-centered position produced by spectral_input.
double centered_position_frequency_hz(std::size_t position, std::size_t n);

}  // namespace ards
