#include <doctest.h>

#include "ards/error.hpp"
#include "ards/features.hpp"
#include "ards/flow.hpp"
#include "ards/segmentation.hpp"
#include "ards/spectral.hpp"
#include "ards/synth.hpp"

#include "support/tempdir.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace ards;

namespace {

ClassBreathModel fixed_model(double rr, double peak, double frac, double tau = 0.5) {
    ClassBreathModel m;
    m.resp_rate_mean = rr;
    m.resp_rate_sd = 0.0;
    m.peak_insp_flow_mean = peak;
    m.peak_insp_flow_sd = 0.0;
    m.insp_fraction_mean = frac;
    m.insp_fraction_sd = 0.0;
    m.exp_decay_tau_mean = tau;
    m.exp_decay_tau_sd = 0.0;
    return m;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("noise-free fixed-rate breathing produces exactly periodic onsets") {
    // 15 breaths/min at 50 Hz: a 200-sample cycle.
    const auto model = fixed_model(15.0, 40.0, 0.33);
    Rng rng(1);
    const auto [series, truth] =
        generate_patient(model, PlantedSignal{}, false, 60.0, 0.0, 2.5, 0.0, rng);
    REQUIRE(truth.onsets.size() == 14);  // half-second lead-in, then 200/cycle
    for (std::size_t k = 0; k < truth.onsets.size(); ++k) {
        CHECK(truth.onsets[k] == 25 + 200 * k);
    }
    const auto onsets = detect_breath_onsets(series, SegmentationConfig{});
    REQUIRE(onsets.size() == 14);
    CHECK(onsets[0] == 25);
    for (std::size_t k = 1; k < onsets.size(); ++k) {
        CHECK(onsets[k] - onsets[k - 1] == 200);
    }
    // Analytic tidal volume follows the half-sine integral.
    const auto& b = truth.breaths.front();
    CHECK(b.tv_insp_l ==
          doctest::Approx((2.0 / std::numbers::pi) * 40.0 * b.i_time_s / 60.0).epsilon(1e-12));
}

TEST_CASE("onset detection recovers ground truth exactly on clean data") {
    // Steeper first sample: 45 L/min peak with a 0.28 inspiratory fraction
    // clears the 2 L/min threshold on the opening sample.
    const auto model = fixed_model(16.5, 45.0, 0.28);
    Rng rng(2);
    const auto [series, truth] =
        generate_patient(model, PlantedSignal{}, false, 120.0, 0.0, 2.5, 0.0, rng);
    const auto onsets = detect_breath_onsets(series, SegmentationConfig{});
    REQUIRE(onsets.size() == truth.onsets.size());
    for (std::size_t k = 0; k < onsets.size(); ++k) {
        CHECK(onsets[k] == truth.onsets[k]);
    }
}

TEST_CASE("extracted tidal volume tracks the analytic integral within 2%") {
    const auto model = fixed_model(16.5, 45.0, 0.28);
    Rng rng(3);
    const auto [series, truth] =
        generate_patient(model, PlantedSignal{}, false, 120.0, 0.0, 2.5, 0.0, rng);
    const auto onsets = detect_breath_onsets(series, SegmentationConfig{});
    const auto segments = segment_breaths(series, onsets);
    REQUIRE(!segments.empty());
    for (const auto& seg : segments) {
        const auto f = extract_breath_features(seg, kSampleRateHz);
        const auto& b = truth.breaths.front();
        CHECK(std::abs(f.tv_insp - b.tv_insp_l) / b.tv_insp_l < 0.02);
    }
}

TEST_CASE("each breath conserves volume by construction") {
    const auto model = fixed_model(16.0, 45.0, 0.3);
    Rng rng(4);
    const auto [series, truth] =
        generate_patient(model, PlantedSignal{}, false, 60.0, 0.0, 2.5, 0.0, rng);
    REQUIRE(truth.onsets.size() >= 2);
    const std::size_t period = truth.onsets[1] - truth.onsets[0];
    const double tv = truth.breaths.front().tv_insp_l;
    for (std::size_t k = 0; k + 1 < truth.onsets.size(); ++k) {
        double net = 0.0;
        for (std::size_t i = truth.onsets[k]; i < truth.onsets[k] + period; ++i) {
            net += series.samples[i];
        }
        net = net * 0.02 / 60.0;  // L
        CHECK(std::abs(net) < 0.1 * tv);
    }
}

TEST_CASE("the volume imbalance knob shifts the cycle integral") {
    const auto model = fixed_model(16.0, 45.0, 0.3);
    Rng rng(5);
    const auto [series, truth] =
        generate_patient(model, PlantedSignal{}, false, 60.0, 0.0, 2.5, 0.2, rng);
    const std::size_t period = truth.onsets[1] - truth.onsets[0];
    const double tv = truth.breaths.front().tv_insp_l;
    double net = 0.0;
    for (std::size_t i = truth.onsets[0]; i < truth.onsets[0] + period; ++i) {
        net += series.samples[i];
    }
    net = net * 0.02 / 60.0;
    CHECK(net > 0.15 * tv);
    CHECK(net < 0.25 * tv);
}

TEST_CASE("cohort generation is reproducible bit for bit") {
    SynthConfig cfg;
    cfg.n_patients_per_class = 2;
    cfg.duration_s = 30.0;
    cfg.seed = 99;
    cfg.plant = PlantedSignal{10.0, 12.0, 6.0, Label::Ards};

    testutil::TempDir d1("synth_a"), d2("synth_b");
    generate_cohort(cfg, d1.path());
    generate_cohort(cfg, d2.path());
    for (const auto* name : {"a001.txt", "a002.txt", "n001.txt", "n002.txt",
                             "manifest.json", "ground_truth.json"}) {
        CAPTURE(name);
        CHECK(file_bytes(d1.path() / name) == file_bytes(d2.path() / name));
    }

    SynthConfig other = cfg;
    other.seed = 100;
    testutil::TempDir d3("synth_c");
    generate_cohort(other, d3.path());
    CHECK(file_bytes(d1.path() / "a001.txt") != file_bytes(d3.path() / "a001.txt"));
}

TEST_CASE("generated cohorts load back through the manifest") {
    SynthConfig cfg;
    cfg.n_patients_per_class = 3;
    cfg.duration_s = 20.0;
    cfg.seed = 7;
    testutil::TempDir tmp("synth_load");
    const auto gen = generate_cohort(cfg, tmp.path());
    CHECK(gen.manifest.entries.size() == 6);

    const auto loaded = load_manifest(tmp.path() / "manifest.json");
    REQUIRE(loaded.entries.size() == 6);
    int n_ards = 0;
    for (const auto& e : loaded.entries) {
        if (e.label == Label::Ards) ++n_ards;
    }
    CHECK(n_ards == 3);
    const auto cohort = load_cohort(loaded);
    for (const auto& s : cohort) {
        CHECK(s.samples.size() == 1000);
    }

    const auto truth = load_ground_truth(tmp.path() / "ground_truth.json");
    REQUIRE(truth.patients.size() == 6);
    for (const auto& [id, pt] : truth.patients) {
        CAPTURE(id);
        CHECK(!pt.onsets.empty());
        CHECK(pt.onsets.size() == pt.breaths.size());
        CHECK(pt.breaths.front().tv_insp_l ==
              gen.truth.patients.at(id).breaths.front().tv_insp_l);
    }
}

TEST_CASE("the planted band concentrates energy where configured") {
    const auto model = fixed_model(16.5, 45.0, 0.28);
    const PlantedSignal plant{10.0, 12.0, 10.0, Label::Ards};
    Rng rng_plant(11), rng_clean(11);
    const auto [planted, t1] =
        generate_patient(model, plant, true, 120.0, 0.0, 2.5, 0.0, rng_plant);
    const auto [clean, t2] =
        generate_patient(model, plant, false, 120.0, 0.0, 2.5, 0.0, rng_clean);

    SegmentationConfig seg_cfg;
    auto band_energy = [&](const FlowSeries& s) {
        const auto onsets = detect_breath_onsets(s, seg_cfg);
        const auto instances = make_instances(s, onsets, seg_cfg);
        REQUIRE(!instances.empty());
        double total = 0.0;
        for (const auto& inst : instances) {
            const auto spec = dft(inst.values);
            for (std::size_t k = 0; k < spec.size(); ++k) {
                const double f = std::abs(spec.frequency_hz(k));
                if (f >= 10.0 && f <= 12.0) total += std::norm(spec.bins[k]);
            }
        }
        return total / static_cast<double>(instances.size());
    };

    CHECK(band_energy(planted) >= 4.0 * band_energy(clean));
}

TEST_CASE("the planted tone leaves onsets and peak flows intact") {
    const auto model = fixed_model(16.5, 45.0, 0.28);
    const PlantedSignal plant{10.0, 12.0, 6.0, Label::Ards};
    Rng rng(13);
    const auto [series, truth] =
        generate_patient(model, plant, true, 120.0, 0.0, 2.5, 0.0, rng);
    const auto onsets = detect_breath_onsets(series, SegmentationConfig{});
    CHECK(onsets.size() == truth.onsets.size());
    std::size_t matched = 0;
    for (std::size_t k = 0; k < std::min(onsets.size(), truth.onsets.size()); ++k) {
        if (onsets[k] >= truth.onsets[k] - 2 && onsets[k] <= truth.onsets[k] + 2) ++matched;
    }
    CHECK(matched == truth.onsets.size());
}

TEST_CASE("parameter draws respect the clamp") {
    ClassBreathModel wide;
    wide.resp_rate_mean = 16.0;
    wide.resp_rate_sd = 1.2;
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        const auto [series, truth] =
            generate_patient(wide, PlantedSignal{}, false, 30.0, 0.0, 2.5, 0.0, rng);
        REQUIRE(truth.onsets.size() >= 2);
        const double period_s = static_cast<double>(truth.onsets[1] - truth.onsets[0]) / 50.0;
        const double rr = 60.0 / period_s;
        CHECK(rr > 16.0 - 2.5 * 1.2 - 0.2);
        CHECK(rr < 16.0 + 2.5 * 1.2 + 0.2);
    }
}

TEST_CASE("invalid generator configs are rejected") {
    SynthConfig cfg;
    cfg.plant = PlantedSignal{10.0, 30.0, 5.0, Label::Ards};  // above Nyquist
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);

    SynthConfig neg;
    neg.noise_sd = -1.0;
    CHECK_THROWS_AS(neg.validate(), ConfigInvalid);

    SynthConfig frac;
    frac.ards.insp_fraction_mean = 0.9;
    CHECK_THROWS_AS(frac.validate(), ConfigInvalid);

    SynthConfig zero;
    zero.n_patients_per_class = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigInvalid);

    SynthConfig ok;
    CHECK_NOTHROW(ok.validate());
}
