#include "ards/synth.hpp"

#include "ards/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace ards {
namespace {

double sample_clamped(Rng& rng, double mean, double sd) {
    const double v = mean + sd * rng.normal();
    return std::clamp(v, mean - 2.5 * sd, mean + 2.5 * sd);
}

void check_range(const char* what, double lo, double hi, double bound_lo, double bound_hi) {
    if (!(lo >= bound_lo && hi <= bound_hi && lo <= hi)) {
        std::ostringstream os;
        os << what << " out of range: sampled interval [" << lo << ", " << hi
           << "] must lie within [" << bound_lo << ", " << bound_hi << "]";
        throw ConfigInvalid(os.str());
    }
}

void validate_class(const char* name, const ClassBreathModel& m) {
    const auto span = [](double mean, double sd) {
        return std::pair<double, double>{mean - 2.5 * sd, mean + 2.5 * sd};
    };
    if (m.resp_rate_sd < 0 || m.peak_insp_flow_sd < 0 || m.insp_fraction_sd < 0 ||
        m.exp_decay_tau_sd < 0) {
        throw ConfigInvalid(std::string(name) + ": standard deviations must be non-negative");
    }
    auto [rr_lo, rr_hi] = span(m.resp_rate_mean, m.resp_rate_sd);
    check_range("resp_rate", rr_lo, rr_hi, 5.0, 40.0);
    auto [pk_lo, pk_hi] = span(m.peak_insp_flow_mean, m.peak_insp_flow_sd);
    check_range("peak_insp_flow", pk_lo, pk_hi, 5.0, 120.0);
    auto [fr_lo, fr_hi] = span(m.insp_fraction_mean, m.insp_fraction_sd);
    check_range("insp_fraction", fr_lo, fr_hi, 0.05, 0.8);
    auto [tau_lo, tau_hi] = span(m.exp_decay_tau_mean, m.exp_decay_tau_sd);
    check_range("exp_decay_tau", tau_lo, tau_hi, 0.05, 5.0);
}

}  // namespace

void SynthConfig::validate() const {
    if (n_patients_per_class == 0) throw ConfigInvalid("n_patients_per_class must be >= 1");
    if (!(duration_s > 0)) throw ConfigInvalid("duration_s must be positive");
    if (noise_sd < 0) throw ConfigInvalid("noise_sd must be non-negative");
    if (end_exp_bias < 0) throw ConfigInvalid("end_exp_bias must be non-negative");
    if (volume_imbalance_frac < 0 || volume_imbalance_frac > 0.5) {
        throw ConfigInvalid("volume_imbalance_frac must be in [0, 0.5]");
    }
    validate_class("ards", ards);
    validate_class("non_ards", non_ards);
    if (plant.active()) {
        if (!(plant.band_low_hz > 0 && plant.band_low_hz < plant.band_high_hz &&
              plant.band_high_hz <= kSampleRateHz / 2.0)) {
            throw ConfigInvalid("planted band must satisfy 0 < low < high <= Nyquist");
        }
    }
}

std::pair<FlowSeries, PatientTruth> generate_patient(const ClassBreathModel& params,
                                                     const PlantedSignal& plant,
                                                     bool plant_applies,
                                                     double duration_s,
                                                     double noise_sd,
                                                     double end_exp_bias,
                                                     double volume_imbalance_frac,
                                                     Rng& rng) {
    constexpr double fs = kSampleRateHz;
    constexpr double dt = 1.0 / fs;
    constexpr double pi = std::numbers::pi;

    const double rr = sample_clamped(rng, params.resp_rate_mean, params.resp_rate_sd);
    const double peak = sample_clamped(rng, params.peak_insp_flow_mean, params.peak_insp_flow_sd);
    const double frac = sample_clamped(rng, params.insp_fraction_mean, params.insp_fraction_sd);
    const double tau = sample_clamped(rng, params.exp_decay_tau_mean, params.exp_decay_tau_sd);

    const auto n_total = static_cast<std::size_t>(std::llround(duration_s * fs));
    const auto period = static_cast<std::size_t>(std::llround(fs * 60.0 / rr));
    const auto n_insp = static_cast<std::size_t>(std::llround(static_cast<double>(period) * frac));
    if (n_insp < 2 || period - n_insp < 2 || period > n_total) {
        throw ConfigInvalid("breath geometry degenerate: check resp_rate/insp_fraction/duration");
    }
    const std::size_t n_exp = period - n_insp;

    // The inspiratory arch samples a half-sine at phases (j + 1.5)/(n_insp + 2):
    // the opening sample then sits well above the onset threshold instead of
    // hugging zero, and the analytic integral (effective duration n_insp + 2
    // samples) matches the rectangular sum of the emitted values to O(1/m^2).
    const double i_time = static_cast<double>(n_insp + 2) * dt;
    const double e_time = static_cast<double>(n_exp) * dt;
    const double tv_insp = (2.0 / pi) * peak * i_time / 60.0;

    // Choose the expiratory peak so the exhaled volume matches the inhaled
    // volume (scaled by the imbalance knob) after accounting for the
    // end-expiratory bias that keeps pre-onset samples reliably non-positive.
    const double exhale_ls = 60.0 * tv_insp * (1.0 - volume_imbalance_frac);
    const double exp_shape = tau * (1.0 - std::exp(-e_time / tau));
    const double exp_peak = (exhale_ls - end_exp_bias * e_time) / exp_shape;
    if (!(exp_peak > 0)) {
        throw ConfigInvalid("expiratory peak non-positive: lower end_exp_bias or raise tidal volume");
    }

    FlowSeries series;
    series.sample_rate_hz = kSampleRateHz;
    series.samples.assign(n_total, -end_exp_bias);
    PatientTruth truth;

    // Quiet half-second lead-in so the detector's pre-onset run can precede
    // even the first breath.
    const std::size_t lead = static_cast<std::size_t>(kSampleRateHz) / 2;
    std::size_t start = lead;
    while (start + period <= n_total) {
        double* v = series.samples.data() + start;
        for (std::size_t j = 0; j < n_insp; ++j) {
            v[j] = peak * std::sin(pi * (static_cast<double>(j) + 1.5) /
                                   static_cast<double>(n_insp + 2));
        }
        for (std::size_t j = 0; j < n_exp; ++j) {
            const double t = (static_cast<double>(j) + 0.5) * dt;
            v[n_insp + j] = -(exp_peak * std::exp(-t / tau) + end_exp_bias);
        }
        if (plant_applies && plant.active()) {
            const double width = plant.band_high_hz - plant.band_low_hz;
            const double f = rng.uniform(plant.band_low_hz + 0.1 * width,
                                         plant.band_high_hz - 0.1 * width);
            const double phase = rng.uniform(0.0, 2.0 * pi);
            // Hann-enveloped burst confined to early-mid expiration (2%-32% of
            // the period past the inspiratory phase).  There the expiratory
            // flow magnitude exceeds the tone, so the flow keeps its sign: no
            // false onsets, no peak shifts, and rectified volumes only pick up
            // an oscillatory term whose per-breath sign is randomized by the
            // phase draw.
            const auto s_lo = n_insp + static_cast<std::size_t>(std::llround(
                                           0.02 * static_cast<double>(period)));
            const auto s_hi = std::min(
                period, s_lo + static_cast<std::size_t>(std::llround(
                                   0.30 * static_cast<double>(period))));
            for (std::size_t j = s_lo; j < s_hi; ++j) {
                const double u = static_cast<double>(j - s_lo) /
                                 static_cast<double>(s_hi - s_lo);
                const double env = 0.5 * (1.0 - std::cos(2.0 * pi * u));
                const double t = static_cast<double>(j) * dt;
                v[j] += plant.amplitude * env * std::sin(2.0 * pi * f * t + phase);
            }
        }
        truth.onsets.push_back(start);
        truth.breaths.push_back(BreathTruth{tv_insp, i_time, e_time});
        start += period;
    }

    if (noise_sd > 0) {
        for (double& s : series.samples) s += noise_sd * rng.normal();
    }
    return {std::move(series), std::move(truth)};
}

GeneratedCohort generate_cohort(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    GeneratedCohort out;
    const struct {
        Label label;
        const ClassBreathModel* model;
        const char* prefix;
        std::uint64_t salt;
    } classes[] = {
        {Label::Ards, &cfg.ards, "a", 0},
        {Label::NonArds, &cfg.non_ards, "n", 1},
    };

    for (const auto& cls : classes) {
        const bool planted = cfg.plant.active() && cfg.plant.target == cls.label;
        for (std::size_t i = 0; i < cfg.n_patients_per_class; ++i) {
            Rng rng(derive_seed(cfg.seed, cls.salt, static_cast<std::uint64_t>(i)));
            auto [series, truth] =
                generate_patient(*cls.model, cfg.plant, planted, cfg.duration_s, cfg.noise_sd,
                                 cfg.end_exp_bias, cfg.volume_imbalance_frac, rng);
            std::ostringstream id;
            id << cls.prefix << std::setw(3) << std::setfill('0') << (i + 1);
            series.patient_id = id.str();
            series.label = cls.label;

            const auto flow_path = out_dir / (series.patient_id + ".txt");
            save_flow_series(series.samples, flow_path);
            out.manifest.entries.push_back(
                ManifestEntry{series.patient_id, series.label, flow_path});
            out.truth.patients.emplace(series.patient_id, std::move(truth));
        }
    }

    save_manifest(out.manifest, out_dir / "manifest.json");
    save_ground_truth(out.truth, out_dir / "ground_truth.json");
    return out;
}

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    nlohmann::json patients = nlohmann::json::object();
    for (const auto& [id, pt] : truth.patients) {
        nlohmann::json breaths = nlohmann::json::array();
        for (const auto& b : pt.breaths) {
            breaths.push_back({{"tv_insp_l", b.tv_insp_l},
                               {"i_time_s", b.i_time_s},
                               {"e_time_s", b.e_time_s}});
        }
        patients[id] = {{"onsets", pt.onsets}, {"breaths", std::move(breaths)}};
    }
    nlohmann::json doc = {{"patients", std::move(patients)}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    GroundTruth truth;
    try {
        for (const auto& [id, pt] : doc.at("patients").items()) {
            PatientTruth out;
            out.onsets = pt.at("onsets").get<std::vector<std::size_t>>();
            for (const auto& b : pt.at("breaths")) {
                out.breaths.push_back(BreathTruth{b.at("tv_insp_l").get<double>(),
                                                  b.at("i_time_s").get<double>(),
                                                  b.at("e_time_s").get<double>()});
            }
            truth.patients.emplace(id, std::move(out));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return truth;
}

}  // namespace ards
