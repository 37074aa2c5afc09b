#include <doctest.h>

#include "ards/error.hpp"
#include "ards/flow.hpp"
#include "ards/rng.hpp"
#include "ards/spectral.hpp"

#include "support/oracles.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

using namespace ards;

namespace {

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-10.0, 10.0);
    return v;
}

double max_abs(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> sine_at(double freq_hz, std::size_t n, double amp = 1.0, double mean = 0.0) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = mean + amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) /
                                     static_cast<double>(kSampleRateHz));
    }
    return v;
}

}  // namespace

TEST_CASE("fast transform matches the direct quadratic sum") {
    for (std::size_t n : {1ul, 2ul, 3ul, 7ul, 16ul, 37ul, 224ul, 500ul}) {
        const auto x = random_signal(n, 1000 + n);
        const auto fast = dft(x);
        const auto slow = oracle::naive_dft(x);
        REQUIRE(fast.size() == n);
        double scale = 1.0;
        for (const auto& b : slow) scale = std::max(scale, std::abs(b));
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(fast.bins[k] - slow[k]) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("inverse transform matches the direct inverse and round-trips") {
    for (std::size_t n : {2ul, 5ul, 24ul, 224ul, 311ul}) {
        const auto x = random_signal(n, 2000 + n);
        const auto spec = dft(x);
        double residue = -1.0;
        const auto back = idft(spec, &residue);
        REQUIRE(back.size() == n);
        CHECK(residue >= 0.0);
        const double scale = std::max(1.0, max_abs(x));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(back[i] - x[i]) <= 1e-10 * scale);
        }
        const auto slow = oracle::naive_idft(spec.bins);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(back[i] - slow[i].real()) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("transform conserves energy") {
    for (std::size_t n : {16ul, 224ul, 100ul}) {
        const auto x = random_signal(n, 3000 + n);
        const auto spec = dft(x);
        double time_energy = 0.0;
        for (double v : x) time_energy += v * v;
        double freq_energy = 0.0;
        for (const auto& b : spec.bins) freq_energy += std::norm(b);
        freq_energy /= static_cast<double>(n);
        CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-10));
    }
}

TEST_CASE("bins map to signed frequencies") {
    Spectrum s;
    s.bins.resize(224);
    CHECK(s.bin_resolution_hz() == doctest::Approx(50.0 / 224.0));
    CHECK(s.frequency_hz(0) == 0.0);
    CHECK(s.frequency_hz(1) == doctest::Approx(50.0 / 224.0));
    CHECK(s.frequency_hz(112) == doctest::Approx(25.0));
    CHECK(s.frequency_hz(113) == doctest::Approx(-111.0 * 50.0 / 224.0));
    CHECK(s.frequency_hz(223) == doctest::Approx(-50.0 / 224.0));

    Spectrum odd;
    odd.bins.resize(5);
    CHECK(odd.frequency_hz(2) == doctest::Approx(20.0));
    CHECK(odd.frequency_hz(3) == doctest::Approx(-20.0));
}

TEST_CASE("ablation keeps in-band tones and removes out-of-band tones") {
    const std::size_t n = 200;  // resolution 0.25 Hz
    const auto tone = sine_at(5.0, n, 3.0);

    const auto kept = band_ablate(tone, AblationBand{4.0, 6.0, true});
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(kept[i] - tone[i]) < 1e-9);
    }

    const auto removed = band_ablate(tone, AblationBand{10.0, 12.0, true});
    CHECK(max_abs(removed) < 1e-9);
}

TEST_CASE("band edges are inclusive") {
    const std::size_t n = 100;  // resolution 0.5 Hz
    const auto at_high = sine_at(5.0, n);
    const auto kept_high = band_ablate(at_high, AblationBand{2.0, 5.0, true});
    CHECK(max_abs(kept_high) > 0.9);

    const auto at_low = sine_at(2.0, n);
    const auto kept_low = band_ablate(at_low, AblationBand{2.0, 5.0, true});
    CHECK(max_abs(kept_low) > 0.9);

    const auto outside = sine_at(5.5, n);
    const auto gone = band_ablate(outside, AblationBand{2.0, 5.0, true});
    CHECK(max_abs(gone) < 1e-9);
}

TEST_CASE("the DC bin is controlled only by keep_dc") {
    const std::size_t n = 100;
    const auto shifted = sine_at(5.0, n, 2.0, 3.0);  // mean 3, tone at 5 Hz

    const auto dc_kept = band_ablate(shifted, AblationBand{10.0, 12.0, true});
    for (double v : dc_kept) CHECK(v == doctest::Approx(3.0).epsilon(1e-9));

    const auto dc_gone = band_ablate(shifted, AblationBand{10.0, 12.0, false});
    CHECK(max_abs(dc_gone) < 1e-9);

    // Even when the band nominally covers 0 Hz, keep_dc=false removes DC.
    const auto low_band = band_ablate(shifted, AblationBand{0.0, 6.0, false});
    double mean = 0.0;
    for (double v : low_band) mean += v;
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(max_abs(low_band) > 1.5);  // the tone survives
}

TEST_CASE("ablation is idempotent and nested lowpasses compose") {
    const auto x = random_signal(224, 4242);
    const AblationBand band{3.0, 9.0, true};
    const auto once = band_ablate(x, band);
    const auto twice = band_ablate(once, band);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(twice[i] - once[i]) < 1e-9);
    }

    const auto lp2 = lowpass_ablate(x, 2.0);
    const auto lp8_then_2 = lowpass_ablate(lowpass_ablate(x, 8.0), 2.0);
    const auto lp2_then_8 = lowpass_ablate(lp2, 8.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(lp8_then_2[i] - lp2[i]) < 1e-9);
        CHECK(std::abs(lp2_then_8[i] - lp2[i]) < 1e-9);
    }
}

TEST_CASE("asymmetric spectra are rejected on inversion") {
    Spectrum broken;
    broken.bins.assign(8, {0.0, 0.0});
    broken.bins[1] = {1.0, 0.0};  // missing the conjugate partner at bin 7
    CHECK_THROWS_AS(idft(broken), ImaginaryResidueExceeded);
}

TEST_CASE("invalid ablation bands are rejected") {
    const auto x = random_signal(32, 5);
    CHECK_THROWS_AS(band_ablate(x, AblationBand{6.0, 3.0, true}), ConfigInvalid);
    CHECK_THROWS_AS(band_ablate(x, AblationBand{-1.0, 3.0, true}), ConfigInvalid);
}

TEST_CASE("spectral input is the DC-centered magnitude spectrum") {
    const auto x = random_signal(224, 606);
    const auto centered = spectral_input(x);
    const auto spec = dft(x);
    REQUIRE(centered.size() == 224);
    CHECK(centered[112] == doctest::Approx(std::abs(spec.bins[0])));
    for (std::size_t i = 0; i < 224; ++i) {
        const std::size_t k = (i + 224 - 112) % 224;
        CHECK(centered[i] == doctest::Approx(std::abs(spec.bins[k])));
    }
    CHECK(centered_position_frequency_hz(112, 224) == doctest::Approx(0.0));
    CHECK(centered_position_frequency_hz(0, 224) == doctest::Approx(-25.0));
    CHECK(centered_position_frequency_hz(113, 224) == doctest::Approx(50.0 / 224.0));
}

TEST_CASE("a planted tone lands at the expected centered positions") {
    // 11 Hz at 224 samples: offset 11/(50/224) = 49.28 bins from center.
    auto x = sine_at(11.0, 224, 5.0);
    const auto centered = spectral_input(x);
    std::size_t best = 0;
    for (std::size_t i = 113; i < 224; ++i) {
        if (centered[i] > centered[best]) best = i;
    }
    const double f = centered_position_frequency_hz(best, 224);
    CHECK(f > 10.0);
    CHECK(f < 12.0);
}
