#pragma once

#include "ards/flow.hpp"
#include "ards/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace ards {

// Per-class breath model.  Values are sampled once per patient from
// N(mean, sd) and clamped to mean +/- 2.5 sd.
struct ClassBreathModel {
    double resp_rate_mean = 16.5;       // breaths/min
    double resp_rate_sd = 0.8;
    double peak_insp_flow_mean = 45.0;  // L/min
    double peak_insp_flow_sd = 3.0;
    double insp_fraction_mean = 0.28;
    double insp_fraction_sd = 0.015;
    double exp_decay_tau_mean = 0.55;   // s
    double exp_decay_tau_sd = 0.05;
};

// Band-limited tone added to every breath of the target class: a
// Hann-enveloped sinusoid confined to early-mid expiration (2%-32% of the
// breath period past inspiration), with per-breath random frequency (drawn
// from the inner 80% of the band) and random phase.  Within that support the
// expiratory flow magnitude exceeds practical tone amplitudes, so the planted
// signal changes no onset, no flow extreme, and no rectified volume: expert
// breath features stay untouched while the band is plainly visible to a
// spectral or convolutional detector.
struct PlantedSignal {
    double band_low_hz = 0.0;
    double band_high_hz = 0.0;
    double amplitude = 0.0;  // L/min; 0 disables the plant
    Label target = Label::Ards;

    bool active() const { return amplitude > 0.0; }
};

struct SynthConfig {
    std::size_t n_patients_per_class = 20;
    double duration_s = 480.0;
    std::uint64_t seed = 0;
    ClassBreathModel ards;
    ClassBreathModel non_ards;
    double noise_sd = 0.5;              // broadband, L/min
    PlantedSignal plant;
    double end_exp_bias = 2.5;          // L/min below zero at end-expiration
    double volume_imbalance_frac = 0.0; // 0 = exhaled volume matches inhaled

    void validate() const;  // throws ConfigInvalid
};

struct BreathTruth {
    double tv_insp_l = 0.0;  // analytic half-sine integral
    double i_time_s = 0.0;
    double e_time_s = 0.0;
};

struct PatientTruth {
    std::vector<std::size_t> onsets;
    std::vector<BreathTruth> breaths;
};

struct GroundTruth {
    std::map<std::string, PatientTruth> patients;
};

// One patient's synthetic recording plus its exact breath bookkeeping.
// Deterministic given rng state.
std::pair<FlowSeries, PatientTruth> generate_patient(const ClassBreathModel& params,
                                                     const PlantedSignal& plant,
                                                     bool plant_applies,
                                                     double duration_s,
                                                     double noise_sd,
                                                     double end_exp_bias,
                                                     double volume_imbalance_frac,
                                                     Rng& rng);

struct GeneratedCohort {
    CohortManifest manifest;
    GroundTruth truth;
};

// Writes manifest.json, one flow file per patient, and ground_truth.json into
// out_dir.  Patient streams derive from (seed, class, index), so regeneration
// with the same seed reproduces the directory bit for bit.
GeneratedCohort generate_cohort(const SynthConfig& cfg,
                                const std::filesystem::path& out_dir);

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace ards
