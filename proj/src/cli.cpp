#include "ards/cli.hpp"

#include "ards/error.hpp"
#include "ards/experiment.hpp"
#include "ards/features.hpp"
#include "ards/flow.hpp"
#include "ards/forest.hpp"
#include "ards/gradcam.hpp"
#include "ards/report.hpp"
#include "ards/rng.hpp"
#include "ards/segmentation.hpp"
#include "ards/spectral.hpp"
#include "ards/synth.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace ards {

namespace fs = std::filesystem;

namespace {

constexpr double kUnsetHz = std::numeric_limits<double>::quiet_NaN();

std::string fmt4(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

fs::path manifest_path(const fs::path& cohort) {
    if (fs::is_directory(cohort)) return cohort / "manifest.json";
    return cohort;
}

std::vector<FlowSeries> load_cohort_arg(const fs::path& cohort) {
    return load_cohort(load_manifest(manifest_path(cohort)));
}

FlowSeries load_flow_arg(const fs::path& flow) {
    ManifestEntry entry;
    entry.patient_id = flow.stem().string();
    entry.flow_file = flow;
    return load_flow_series(entry);
}

// --out falls back to the ARDSW_OUT environment variable for directory
// outputs; having neither is a usage error.
fs::path resolve_out_dir(const std::string& out) {
    if (!out.empty()) return out;
    const char* env = std::getenv("ARDSW_OUT");
    if (env != nullptr && *env != '\0') return env;
    throw CLI::RequiredError("--out (or the ARDSW_OUT environment variable)");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void emit_text(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text(out, text);
        std::cout << "wrote: " << out << "\n";
    }
}

struct SegmentedPatient {
    std::vector<BreathInstance> instances;
    std::vector<BreathWindow> windows;
    std::vector<BreathSegment> segments;
};

// Optional cutoff applies after onset detection: anchors always come from
// the unfiltered recording, and the lowpass only rewrites the sample
// content sliced at those anchors.
SegmentedPatient segment_patient(const FlowSeries& series, const SegmentationConfig& cfg,
                                 double cutoff_hz = kUnsetHz) {
    SegmentedPatient out;
    const auto onsets = detect_breath_onsets(series, cfg);
    if (std::isfinite(cutoff_hz)) {
        FlowSeries filtered = series;
        filtered.samples = lowpass_ablate(filtered.samples, cutoff_hz);
        out.instances = make_instances(filtered, onsets, cfg);
        out.windows = make_windows(out.instances, cfg);
        out.segments = segment_breaths(filtered, onsets);
        return out;
    }
    out.instances = make_instances(series, onsets, cfg);
    out.windows = make_windows(out.instances, cfg);
    out.segments = segment_breaths(series, onsets);
    return out;
}

void add_segmentation_flags(CLI::App* cmd, SegmentationConfig* seg) {
    cmd->add_option("--threshold", seg->onset_threshold,
                    "Onset threshold in L/min (default 2)");
    cmd->add_option("--quiet-run", seg->pre_onset_nonpositive_run,
                    "Non-positive samples required before an onset (default 5)");
    cmd->add_option("--instance-length", seg->instance_length,
                    "Samples per breath instance (default 224)");
    cmd->add_option("--window-size", seg->window_size,
                    "Instances per breath window (default 20)");
}

void add_synth(CLI::App& app) {
    struct Opts {
        std::string out;
        SynthConfig cfg;
        double plant_low = 0.0, plant_high = 0.0, plant_amp = 0.0;
        std::string plant_class = "ards";
        double rr_non = 16.5, rr_ards = 16.5, rr_sd = 0.8;
        double peak_non = 45.0, peak_ards = 45.0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "synth", "Generate a synthetic flow cohort with ground truth");
    cmd->add_option("--out", o->out, "Output directory (default: ARDSW_OUT)");
    cmd->add_option("--patients", o->cfg.n_patients_per_class,
                    "Patients per class (default 20)");
    cmd->add_option("--duration", o->cfg.duration_s,
                    "Recording length per patient in seconds (default 480)");
    cmd->add_option("--seed", o->cfg.seed, "Master seed (default 0)");
    cmd->add_option("--noise", o->cfg.noise_sd, "Broadband noise sd in L/min (default 0.5)");
    cmd->add_option("--plant-low", o->plant_low, "Planted band lower edge in Hz");
    cmd->add_option("--plant-high", o->plant_high, "Planted band upper edge in Hz");
    cmd->add_option("--plant-amp", o->plant_amp,
                    "Planted tone amplitude in L/min (0 disables)");
    cmd->add_option("--plant-class", o->plant_class, "Class carrying the plant")
        ->check(CLI::IsMember({"ards", "non_ards"}));
    cmd->add_option("--rr-non", o->rr_non, "Non-ARDS respiratory rate mean (breaths/min)");
    cmd->add_option("--rr-ards", o->rr_ards, "ARDS respiratory rate mean (breaths/min)");
    cmd->add_option("--rr-sd", o->rr_sd, "Respiratory rate sd for both classes");
    cmd->add_option("--peak-non", o->peak_non, "Non-ARDS peak inspiratory flow mean (L/min)");
    cmd->add_option("--peak-ards", o->peak_ards, "ARDS peak inspiratory flow mean (L/min)");
    cmd->callback([o] {
        o->cfg.non_ards.resp_rate_mean = o->rr_non;
        o->cfg.ards.resp_rate_mean = o->rr_ards;
        o->cfg.non_ards.resp_rate_sd = o->rr_sd;
        o->cfg.ards.resp_rate_sd = o->rr_sd;
        o->cfg.non_ards.peak_insp_flow_mean = o->peak_non;
        o->cfg.ards.peak_insp_flow_mean = o->peak_ards;
        o->cfg.plant.band_low_hz = o->plant_low;
        o->cfg.plant.band_high_hz = o->plant_high;
        o->cfg.plant.amplitude = o->plant_amp;
        o->cfg.plant.target = label_from_name(o->plant_class);
        const fs::path dir = resolve_out_dir(o->out);
        const auto generated = generate_cohort(o->cfg, dir);
        std::cout << "manifest: " << (dir / "manifest.json").string() << "\n"
                  << "patients: " << generated.manifest.entries.size() << "\n";
    });
}

void add_segment(CLI::App& app) {
    struct Opts {
        std::string flow, out;
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "segment", "Detect breath onsets and count instances/windows in one recording");
    cmd->add_option("--flow", o->flow, "Flow file, one value per line")->required();
    cmd->add_option("--out", o->out, "Output JSON path (default: stdout)");
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        const FlowSeries series = load_flow_arg(o->flow);
        const auto onsets = detect_breath_onsets(series, o->seg);
        const auto instances = make_instances(series, onsets, o->seg);
        const auto windows = make_windows(instances, o->seg);
        nlohmann::json doc;
        doc["patient_id"] = series.patient_id;
        doc["n_samples"] = series.samples.size();
        doc["onsets"] = onsets;
        doc["n_instances"] = instances.size();
        doc["n_windows"] = windows.size();
        emit_text(o->out, doc.dump(2) + "\n");
    });
}

void add_filter(CLI::App& app) {
    struct Opts {
        std::string flow, out;
        double cutoff = kUnsetHz, low = kUnsetHz, high = kUnsetHz;
        bool drop_dc = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "filter", "Frequency-ablate one recording and write the filtered flow file");
    cmd->add_option("--flow", o->flow, "Input flow file")->required();
    cmd->add_option("--out", o->out, "Output flow file")->required();
    auto* cutoff = cmd->add_option("--cutoff", o->cutoff, "Lowpass cutoff in Hz (keeps DC)");
    auto* low = cmd->add_option("--low", o->low, "Passband lower edge in Hz");
    auto* high = cmd->add_option("--high", o->high, "Passband upper edge in Hz");
    cmd->add_flag("--drop-dc", o->drop_dc, "Zero the DC bin too (band form only)");
    cutoff->excludes(low);
    cutoff->excludes(high);
    low->needs(high);
    high->needs(low);
    cmd->callback([o] {
        const FlowSeries series = load_flow_arg(o->flow);
        std::vector<double> filtered;
        if (std::isfinite(o->cutoff)) {
            filtered = lowpass_ablate(series.samples, o->cutoff);
        } else if (std::isfinite(o->low) && std::isfinite(o->high)) {
            AblationBand band;
            band.low_hz = o->low;
            band.high_hz = o->high;
            band.keep_dc = !o->drop_dc;
            filtered = band_ablate(series.samples, band);
        } else {
            throw CLI::RequiredError("--cutoff or --low/--high");
        }
        save_flow_series(filtered, o->out);
        std::cout << "flow: " << o->out << "\n"
                  << "samples: " << filtered.size() << "\n";
    });
}

void add_featurize(CLI::App& app) {
    struct Opts {
        std::string cohort, out;
        std::vector<double> cutoffs;
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "featurize",
        "Extract per-window expert features, or survey featurization failure "
        "rates across lowpass cutoffs");
    cmd->add_option("--cohort", o->cohort, "Cohort directory or manifest path")->required();
    cmd->add_option("--out", o->out, "Output CSV path (default: stdout)");
    cmd->add_option("--cutoffs", o->cutoffs,
                    "Comma-separated lowpass cutoffs in Hz; when given, emit the "
                    "survival survey instead of feature rows")
        ->delimiter(',');
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        const auto cohort = load_cohort_arg(o->cohort);
        if (!o->cutoffs.empty()) {
            emit_text(o->out, survey_table_csv(
                                  featurization_survey(cohort, o->cutoffs, o->seg)));
            return;
        }
        std::ostringstream csv;
        csv << "patient_id,label,window";
        for (const auto& name : feature_names()) csv << ',' << name;
        csv << '\n';
        csv << std::fixed << std::setprecision(6);
        std::size_t skipped = 0;
        std::size_t emitted = 0;
        for (const auto& series : cohort) {
            const auto parts = segment_patient(series, o->seg);
            for (std::size_t w = 0; w < parts.windows.size(); ++w) {
                WindowFeatureVector row;
                try {
                    row = window_features_from_segments(parts.windows[w], parts.segments);
                } catch (const DegenerateMorphology&) {
                    ++skipped;
                    continue;
                }
                csv << series.patient_id << ',' << label_name(series.label) << ',' << w;
                for (double v : row.values) csv << ',' << v;
                csv << '\n';
                ++emitted;
            }
        }
        if (emitted == 0) {
            throw NoWindows("featurize: no window in the cohort could be featurized");
        }
        if (skipped > 0) {
            std::cerr << "ardsw: featurize: skipped " << skipped
                      << " degenerate windows\n";
        }
        emit_text(o->out, csv.str());
    });
}

void add_train_cnn(CLI::App& app) {
    struct Opts {
        std::string cohort, out, input = "raw", arch = "desk";
        TrainConfig train;
        std::uint64_t seed = 0;
        double cutoff = kUnsetHz;
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "train-cnn", "Train the 1-D DenseNet on every instance of a cohort");
    cmd->add_option("--cohort", o->cohort, "Cohort directory or manifest path")->required();
    cmd->add_option("--out", o->out, "Model output path")->required();
    cmd->add_option("--input", o->input, "Instance presentation")
        ->check(CLI::IsMember({"raw", "fft", "raw_plus_fft"}));
    cmd->add_option("--arch", o->arch, "Network size: desk (fast) or paper (18 layers)")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--epochs", o->train.epochs, "Training epochs (default 10)");
    cmd->add_option("--lr", o->train.learning_rate, "Learning rate (default 0.001)");
    cmd->add_option("--momentum", o->train.momentum, "SGD momentum (default 0)");
    cmd->add_option("--batch", o->train.batch_size, "Batch size (default 32)");
    cmd->add_option("--seed", o->seed, "Master seed (default 0)");
    cmd->add_option("--cutoff", o->cutoff, "Optional lowpass cutoff in Hz (breath anchors stay raw)");
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        auto cohort = load_cohort_arg(o->cohort);
        const InputMode mode = input_mode_from_name(o->input);
        std::vector<TrainingExample> examples;
        for (auto& series : cohort) {
            // Anchors come from the unfiltered recording; the optional
            // lowpass then rewrites the sample content under them.
            const auto onsets = detect_breath_onsets(series, o->seg);
            if (std::isfinite(o->cutoff)) {
                series.samples = lowpass_ablate(series.samples, o->cutoff);
            }
            for (const auto& inst : make_instances(series, onsets, o->seg)) {
                examples.push_back(
                    make_example(inst.values, static_cast<int>(series.label), mode));
            }
        }
        if (examples.empty()) {
            throw NoWindows("train-cnn: the cohort produced no instances");
        }

        DenseNetConfig arch = o->arch == "paper" ? DenseNetConfig::paper_fidelity()
                                                 : DenseNetConfig::desk();
        arch.input_channels = input_mode_channels(mode);
        DenseNet model(arch, derive_seed(o->seed, 0xc101));
        TrainConfig train = o->train;
        train.seed = derive_seed(o->seed, 0xc102);
        train.capture_snapshots = false;
        std::cout << "epoch,mean_loss\n";
        train_cnn(model, examples, train,
                  [](std::size_t epoch, DenseNet&, double mean_loss) {
                      std::cout << (epoch + 1) << ',' << fmt4(mean_loss) << "\n";
                  });
        save_cnn(model, o->out);
        std::cout << "model: " << o->out << "\n"
                  << "examples: " << examples.size() << "\n";
    });
}

void add_train_rf(CLI::App& app) {
    struct Opts {
        std::string cohort, out;
        ForestConfig forest;
        std::uint64_t seed = 0;
        double cutoff = kUnsetHz;
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "train-rf", "Train the random forest on per-window expert features");
    cmd->add_option("--cohort", o->cohort, "Cohort directory or manifest path")->required();
    cmd->add_option("--out", o->out, "Model output path")->required();
    cmd->add_option("--trees", o->forest.n_trees, "Number of trees (default 100)");
    cmd->add_option("--depth", o->forest.max_depth, "Max tree depth, 0 = unlimited");
    cmd->add_option("--min-split", o->forest.min_samples_split,
                    "Minimum rows to split a node (default 2)");
    cmd->add_option("--mtry", o->forest.features_per_split,
                    "Features tried per split, 0 = ceil(sqrt(10))");
    cmd->add_option("--seed", o->seed, "Master seed (default 0)");
    cmd->add_option("--cutoff", o->cutoff, "Optional lowpass cutoff in Hz (breath anchors stay raw)");
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        auto cohort = load_cohort_arg(o->cohort);
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        std::size_t skipped = 0;
        for (const auto& series : cohort) {
            const auto parts = segment_patient(series, o->seg, o->cutoff);
            for (const auto& window : parts.windows) {
                try {
                    const auto row = window_features_from_segments(window, parts.segments);
                    rows.emplace_back(row.values.begin(), row.values.end());
                    labels.push_back(static_cast<int>(series.label));
                } catch (const DegenerateMorphology&) {
                    ++skipped;
                }
            }
        }
        if (rows.empty()) {
            throw NoWindows("train-rf: the cohort produced no featurizable windows");
        }
        if (skipped > 0) {
            std::cerr << "ardsw: train-rf: skipped " << skipped << " degenerate windows\n";
        }
        ForestConfig fc = o->forest;
        fc.seed = derive_seed(o->seed, 0xf07e);
        const RandomForest forest = train_random_forest(rows, labels, fc, 1);
        save_forest(forest, o->out);
        std::cout << "model: " << o->out << "\n"
                  << "rows: " << rows.size() << "\n";
        if (fc.bootstrap) {
            std::cout << "oob_accuracy: " << fmt4(oob_accuracy(forest, rows, labels))
                      << "\n";
        }
    });
}

void add_predict_rf(CLI::App& app) {
    struct Opts {
        std::string model, flow, out;
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "predict-rf", "Score one recording with a trained random forest");
    cmd->add_option("--model", o->model, "Forest model path")->required();
    cmd->add_option("--flow", o->flow, "Flow file to score")->required();
    cmd->add_option("--out", o->out, "Output JSON path (default: stdout)");
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        const RandomForest forest = load_forest(o->model);
        const FlowSeries series = load_flow_arg(o->flow);
        const auto parts = segment_patient(series, o->seg);
        std::vector<double> probabilities;
        std::vector<bool> window_labels;
        std::size_t skipped = 0;
        for (const auto& window : parts.windows) {
            try {
                const auto row = window_features_from_segments(window, parts.segments);
                const double p = rf_predict_proba(
                    forest, std::vector<double>(row.values.begin(), row.values.end()));
                probabilities.push_back(p);
                window_labels.push_back(p > 0.5);
            } catch (const DegenerateMorphology&) {
                ++skipped;
            }
        }
        if (window_labels.empty()) {
            throw NoWindows("predict-rf: no window could be featurized");
        }
        if (skipped > 0) {
            std::cerr << "ardsw: predict-rf: skipped " << skipped
                      << " degenerate windows\n";
        }
        const PatientScore verdict = patient_score(window_labels);
        nlohmann::json doc;
        doc["patient_id"] = series.patient_id;
        doc["n_windows"] = parts.windows.size();
        doc["n_scored"] = window_labels.size();
        doc["window_probabilities"] = probabilities;
        doc["score"] = verdict.score;
        doc["label"] = label_name(verdict.label ? Label::Ards : Label::NonArds);
        emit_text(o->out, doc.dump(2) + "\n");
    });
}

// Flags shared by evaluate and ablation-sweep.
struct HarnessOpts {
    std::string cohort, out;
    std::string scheme = "kfold";
    std::size_t k = 5;
    double train_fraction = 0.7;
    std::size_t trials = 10;
    std::string arch = "desk";
    TrainConfig train;
    ForestConfig forest;
    std::uint64_t seed = 0;
    SegmentationConfig seg;
};

void add_harness_flags(CLI::App* cmd, HarnessOpts* o) {
    cmd->add_option("--cohort", o->cohort, "Cohort directory or manifest path")->required();
    cmd->add_option("--out", o->out, "Report document output path")->required();
    cmd->add_option("--scheme", o->scheme, "Patient split scheme")
        ->check(CLI::IsMember({"kfold", "random_kfold", "holdout", "bootstrap"}));
    cmd->add_option("--k", o->k, "Folds for k-fold schemes (default 5)");
    cmd->add_option("--train-fraction", o->train_fraction,
                    "Training fraction for holdout/bootstrap (default 0.7)");
    cmd->add_option("--trials", o->trials, "Independent trials (default 10)");
    cmd->add_option("--arch", o->arch, "Network size: desk (fast) or paper (18 layers)")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--epochs", o->train.epochs, "CNN training epochs (default 10)");
    cmd->add_option("--lr", o->train.learning_rate, "CNN learning rate (default 0.001)");
    cmd->add_option("--momentum", o->train.momentum, "CNN SGD momentum (default 0)");
    cmd->add_option("--batch", o->train.batch_size, "CNN batch size (default 32)");
    cmd->add_option("--trees", o->forest.n_trees, "Forest size (default 100)");
    cmd->add_option("--depth", o->forest.max_depth, "Max tree depth, 0 = unlimited");
    cmd->add_option("--min-split", o->forest.min_samples_split,
                    "Minimum rows to split a node (default 2)");
    cmd->add_option("--mtry", o->forest.features_per_split,
                    "Features tried per split, 0 = ceil(sqrt(10))");
    cmd->add_option("--seed", o->seed, "Master seed (default 0)");
    add_segmentation_flags(cmd, &o->seg);
}

ExperimentConfig harness_config(const HarnessOpts& o, unsigned threads) {
    ExperimentConfig cfg;
    cfg.scheme = split_scheme_from_name(o.scheme);
    cfg.folds = o.k;
    cfg.train_fraction = o.train_fraction;
    cfg.trials = o.trials;
    cfg.master_seed = o.seed;
    cfg.threads = threads;
    cfg.segmentation = o.seg;
    cfg.cnn = o.arch == "paper" ? DenseNetConfig::paper_fidelity() : DenseNetConfig::desk();
    cfg.train = o.train;
    cfg.forest = o.forest;
    return cfg;
}

void print_aggregate(const MetricsReport& report) {
    const auto line = [](const char* name, const MeanCi& ci) {
        std::cout << name << ',' << fmt4(ci.mean) << ',' << fmt4(ci.half_width) << "\n";
    };
    std::cout << "metric,mean,ci95\n";
    line("auc", report.aggregate.auc);
    line("accuracy", report.aggregate.accuracy);
    line("sensitivity", report.aggregate.sensitivity);
    line("specificity", report.aggregate.specificity);
    line("ppv", report.aggregate.ppv);
    line("npv", report.aggregate.npv);
    std::cout << "invalid_folds," << report.invalid_folds << "\n";
}

void add_evaluate(CLI::App& app, const unsigned* threads) {
    struct Opts : HarnessOpts {
        std::string model = "cnn", input = "auto";
        double cutoff = kUnsetHz;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "evaluate", "Cross-validate one model over a cohort and write a report document");
    cmd->add_option("--model", o->model, "Classifier to evaluate")
        ->check(CLI::IsMember({"cnn", "rf"}));
    cmd->add_option("--input", o->input, "Instance presentation (default: raw for the "
                                         "cnn, features for the rf)")
        ->check(CLI::IsMember({"auto", "raw", "fft", "raw_plus_fft", "features"}));
    cmd->add_option("--cutoff", o->cutoff, "Optional lowpass cutoff in Hz");
    add_harness_flags(cmd, o.get());
    cmd->callback([o, threads] {
        ExperimentConfig cfg = harness_config(*o, *threads);
        cfg.model = model_kind_from_name(o->model);
        if (o->input == "auto") {
            cfg.input = cfg.model == ModelKind::Rf ? ExperimentInput::Features
                                                   : ExperimentInput::Raw;
        } else {
            cfg.input = experiment_input_from_name(o->input);
        }
        if (std::isfinite(o->cutoff)) {
            AblationBand band;
            band.low_hz = 0.0;
            band.high_hz = o->cutoff;
            band.keep_dc = true;
            cfg.ablation = band;
        }
        const MetricsReport report = run_experiment(load_cohort_arg(o->cohort), cfg);
        save_metrics_report(o->out, report);
        std::cout << "report: " << o->out << "\n";
        print_aggregate(report);
    });
}

void add_ablation_sweep(CLI::App& app, const unsigned* threads) {
    struct Opts : HarnessOpts {
        std::vector<double> cutoffs;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "ablation-sweep",
        "Evaluate both models unfiltered and lowpass-ablated at each cutoff");
    cmd->add_option("--cutoffs", o->cutoffs, "Comma-separated lowpass cutoffs in Hz")
        ->delimiter(',')
        ->required();
    add_harness_flags(cmd, o.get());
    cmd->callback([o, threads] {
        const ExperimentConfig base = harness_config(*o, *threads);
        const SweepReport sweep =
            ablation_sweep(load_cohort_arg(o->cohort), base, o->cutoffs);
        save_sweep_report(o->out, sweep);
        std::cout << "report: " << o->out << "\n" << sweep_table_csv(sweep);
    });
}

void add_gradcam(CLI::App& app) {
    struct Opts {
        std::string model, cohort, out, csv;
        std::string cls = "ards", input = "fft";
        SegmentationConfig seg;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "gradcam",
        "Average Grad-CAM saliency over one class's instances and plot it");
    cmd->add_option("--model", o->model, "Trained CNN model path")->required();
    cmd->add_option("--cohort", o->cohort, "Cohort directory or manifest path")->required();
    cmd->add_option("--out", o->out, "Output SVG path")->required();
    cmd->add_option("--csv", o->csv, "Optional CSV path for the averaged map");
    cmd->add_option("--class", o->cls, "Class whose instances are averaged")
        ->check(CLI::IsMember({"ards", "non_ards"}));
    cmd->add_option("--input", o->input, "Instance presentation the model was trained on")
        ->check(CLI::IsMember({"raw", "fft", "raw_plus_fft"}));
    add_segmentation_flags(cmd, &o->seg);
    cmd->callback([o] {
        DenseNet model = load_cnn(o->model);
        const Label target = label_from_name(o->cls);
        const InputMode mode = input_mode_from_name(o->input);
        std::vector<TrainingExample> examples;
        for (const auto& series : load_cohort_arg(o->cohort)) {
            if (series.label != target) continue;
            const auto onsets = detect_breath_onsets(series, o->seg);
            for (const auto& inst : make_instances(series, onsets, o->seg)) {
                examples.push_back(
                    make_example(inst.values, static_cast<int>(series.label), mode));
            }
        }
        const CamBand band =
            average_cam(model, examples, static_cast<std::size_t>(target));

        const std::size_t n = band.mean.size();
        std::vector<double> x(n);
        std::string x_label;
        if (mode == InputMode::Fft) {
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = centered_position_frequency_hz(i, n);
            }
            x_label = "Frequency (Hz)";
        } else {
            for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
            x_label = "Position (sample)";
        }
        write_text(o->out, cam_svg(x, band, x_label));
        std::cout << "svg: " << o->out << "\n"
                  << "instances: " << band.n << "\n";
        if (!o->csv.empty()) {
            std::ostringstream csv;
            csv << "position,x,mean,ci95\n";
            for (std::size_t i = 0; i < n; ++i) {
                csv << i << ',' << fmt4(x[i]) << ',' << fmt4(band.mean[i]) << ','
                    << fmt4(band.ci_half[i]) << '\n';
            }
            write_text(o->csv, csv.str());
            std::cout << "csv: " << o->csv << "\n";
        }
    });
}

void add_report(CLI::App& app) {
    struct Opts {
        std::vector<std::string> metrics;
        std::vector<std::string> names;
        std::string sweep, out;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "report", "Render saved report documents as CSV tables and SVG figures");
    cmd->add_option("--metrics", o->metrics,
                    "Metrics report document(s); repeatable for one combined ROC figure");
    cmd->add_option("--names", o->names, "Legend/table names matching --metrics order")
        ->delimiter(',');
    cmd->add_option("--sweep", o->sweep, "Sweep report document");
    cmd->add_option("--out", o->out, "Output directory (default: ARDSW_OUT)");
    cmd->callback([o] {
        if (o->metrics.empty() && o->sweep.empty()) {
            throw CLI::RequiredError("--metrics or --sweep");
        }
        const fs::path dir = resolve_out_dir(o->out);
        fs::create_directories(dir);

        std::map<std::string, std::size_t> used;
        std::vector<RocBand> bands;
        for (std::size_t i = 0; i < o->metrics.size(); ++i) {
            const MetricsReport report = load_metrics_report(o->metrics[i]);
            std::string name = i < o->names.size()
                                   ? o->names[i]
                                   : model_kind_name(report.config.model);
            std::string file_stem;
            for (char ch : name) {
                file_stem += (std::isalnum(static_cast<unsigned char>(ch)) != 0 ||
                              ch == '-' || ch == '_')
                                 ? ch
                                 : '_';
            }
            const std::size_t repeat = used[file_stem]++;
            if (repeat > 0) file_stem += "_" + std::to_string(repeat + 1);

            const fs::path table = dir / (file_stem + "_folds.csv");
            write_text(table, fold_table_csv(report));
            std::cout << "wrote: " << table.string() << "\n";
            bands.push_back(roc_band(report, name));
        }
        if (!bands.empty()) {
            const fs::path roc = dir / "roc.svg";
            write_text(roc, roc_svg(bands));
            std::cout << "wrote: " << roc.string() << "\n";
        }
        if (!o->sweep.empty()) {
            const fs::path table = dir / "sweep.csv";
            write_text(table, sweep_table_csv(load_sweep_report(o->sweep)));
            std::cout << "wrote: " << table.string() << "\n";
        }
    });
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Ventilator-flow ARDS detection workbench", "ardsw"};
    app.require_subcommand(1);

    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads for parallel stages")
        ->check(CLI::PositiveNumber);

    add_synth(app);
    add_segment(app);
    add_filter(app);
    add_featurize(app);
    add_train_cnn(app);
    add_train_rf(app);
    add_predict_rf(app);
    add_evaluate(app, &threads);
    add_ablation_sweep(app, &threads);
    add_gradcam(app);
    add_report(app);
    for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "ardsw: usage: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "ardsw: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ardsw: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace ards
