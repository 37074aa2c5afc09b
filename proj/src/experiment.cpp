#include "ards/experiment.hpp"

#include "ards/error.hpp"
#include "ards/features.hpp"
#include "ards/parallel.hpp"
#include "ards/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>

namespace ards {

std::string model_kind_name(ModelKind kind) {
    return kind == ModelKind::Cnn ? "cnn" : "rf";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "cnn") return ModelKind::Cnn;
    if (name == "rf") return ModelKind::Rf;
    throw ParseError("unknown model kind '" + name + "' (expected cnn or rf)");
}

std::string experiment_input_name(ExperimentInput input) {
    switch (input) {
        case ExperimentInput::Raw: return "raw";
        case ExperimentInput::Fft: return "fft";
        case ExperimentInput::RawPlusFft: return "raw_plus_fft";
        case ExperimentInput::Features: return "features";
    }
    throw ConfigInvalid("unknown experiment input value");
}

ExperimentInput experiment_input_from_name(const std::string& name) {
    if (name == "raw") return ExperimentInput::Raw;
    if (name == "fft") return ExperimentInput::Fft;
    if (name == "raw_plus_fft") return ExperimentInput::RawPlusFft;
    if (name == "features") return ExperimentInput::Features;
    throw ParseError("unknown experiment input '" + name +
                     "' (expected raw, fft, raw_plus_fft, or features)");
}

void ExperimentConfig::validate() const {
    if (model == ModelKind::Rf && input != ExperimentInput::Features) {
        throw ConfigInvalid("the forest consumes expert features; set input to features");
    }
    if (model == ModelKind::Cnn && input == ExperimentInput::Features) {
        throw ConfigInvalid("the cnn consumes waveform channels, not expert features");
    }
    if (trials == 0) throw ConfigInvalid("an experiment needs trials >= 1");
    if ((scheme == SplitScheme::KFold || scheme == SplitScheme::RandomKFold) && folds < 2) {
        throw ConfigInvalid("k-fold schemes need folds >= 2");
    }
    if (model == ModelKind::Cnn && train.epochs == 0) {
        throw ConfigInvalid("cnn training needs epochs >= 1");
    }
    if (ablation &&
        (!(ablation->low_hz >= 0.0) || !(ablation->high_hz >= ablation->low_hz))) {
        throw ConfigInvalid("ablation band must satisfy 0 <= low <= high");
    }
}

namespace {

// Stream tags keep each task-local purpose on an independent derived seed.
constexpr std::uint64_t kTagPlan = 0x70a1;
constexpr std::uint64_t kTagOversample = 0x05e7;
constexpr std::uint64_t kTagInit = 0xc101;
constexpr std::uint64_t kTagTrain = 0xc102;
constexpr std::uint64_t kTagForest = 0xf07e;

int label01(Label label) { return label == Label::Ards ? 1 : 0; }

InputMode cnn_mode(ExperimentInput input) {
    switch (input) {
        case ExperimentInput::Raw: return InputMode::Raw;
        case ExperimentInput::Fft: return InputMode::Fft;
        case ExperimentInput::RawPlusFft: return InputMode::RawPlusFft;
        case ExperimentInput::Features: break;
    }
    throw ConfigInvalid("features input has no cnn channel mapping");
}

// K-fold reuses one assignment for every trial; the other schemes redraw
// per trial.  The scheme index keeps the streams apart.
std::vector<SplitPlan> build_plans(const std::vector<PatientRef>& refs,
                                   const ExperimentConfig& cfg) {
    std::vector<SplitPlan> plans;
    plans.reserve(cfg.trials);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        switch (cfg.scheme) {
            case SplitScheme::KFold:
                plans.push_back(
                    stratified_kfold(refs, cfg.folds, derive_seed(cfg.master_seed, kTagPlan, 0)));
                break;
            case SplitScheme::RandomKFold:
                plans.push_back(stratified_kfold(refs, cfg.folds,
                                                 derive_seed(cfg.master_seed, kTagPlan, 1, t)));
                break;
            case SplitScheme::Holdout:
                plans.push_back(holdout_split(refs, cfg.train_fraction,
                                              derive_seed(cfg.master_seed, kTagPlan, 2, t)));
                break;
            case SplitScheme::Bootstrap:
                plans.push_back(bootstrap_split(refs, cfg.train_fraction,
                                                derive_seed(cfg.master_seed, kTagPlan, 3, t)));
                break;
        }
    }
    return plans;
}

// Everything derivable from one patient's (possibly filtered) recording.
struct PatientView {
    std::vector<BreathInstance> instances;
    std::vector<BreathWindow> windows;
    std::vector<WindowFeatureVector> features;   // aligned with windows (RF path)
    std::vector<std::string> feature_failures;   // aligned; empty string = ok
};

// Mirror of oversample_instances for feature rows: append re-drawn minority
// rows until the classes balance.
void balance_rows(std::vector<std::vector<double>>& rows, std::vector<int>& labels,
                  std::uint64_t seed) {
    std::vector<std::size_t> members[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[labels[i] == 1 ? 1 : 0].push_back(i);
    }
    if (members[0].empty() || members[1].empty()) {
        throw SingleClass("training rows cover only one class");
    }
    const int minority = members[0].size() < members[1].size() ? 0 : 1;
    const auto& pool = members[minority];
    const std::size_t deficit = members[1 - minority].size() - pool.size();
    Rng rng(derive_seed(seed));
    for (std::size_t i = 0; i < deficit; ++i) {
        const std::size_t pick = pool[rng.bounded(pool.size())];
        auto row = rows[pick];
        rows.push_back(std::move(row));
        labels.push_back(labels[pick]);
    }
}

void check_lowpass_cutoffs(const std::vector<double>& cutoffs) {
    for (double c : cutoffs) {
        if (!(c > 0.0) || !(c <= 25.0)) {
            throw ConfigInvalid("lowpass cutoff must lie in (0, 25] Hz, got " +
                                std::to_string(c));
        }
    }
}

}  // namespace

MetricsReport run_experiment(const std::vector<FlowSeries>& cohort,
                             const ExperimentConfig& config) {
    config.validate();
    MetricsReport report;
    report.config = config;

    std::vector<PatientRef> refs;
    refs.reserve(cohort.size());
    for (const auto& s : cohort) refs.push_back({s.patient_id, s.label});
    const std::vector<SplitPlan> plans = build_plans(refs, config);
    const std::size_t n_folds = plans.front().assignments.size();
    const std::size_t n_epochs = config.model == ModelKind::Cnn ? config.train.epochs : 1;
    const std::size_t n_tasks = config.trials * n_folds;

    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        index_of.emplace(cohort[i].patient_id, i);
    }

    // Segment (and featurize, for the forest) each patient exactly once;
    // every (trial, fold) task reads these views.  Breath anchors come from
    // the unfiltered recording: a brick-wall passband smears the sharp
    // non-positive-to-threshold transition the onset rule requires, so
    // re-detecting on filtered data finds nothing at moderate cutoffs and
    // would leave no windows to evaluate.  Instead the whole series is
    // ablated and instances, windows, and feature segments are cut from the
    // filtered values at the raw onsets — both model paths see identical
    // filtered physiology over identical breath boundaries.
    std::vector<PatientView> views(cohort.size());
    parallel_for(cohort.size(), config.threads, [&](std::size_t i) {
        FlowSeries s = cohort[i];
        const auto onsets = detect_breath_onsets(s, config.segmentation);
        if (config.ablation) s.samples = band_ablate(s.samples, *config.ablation);
        PatientView& v = views[i];
        v.instances = make_instances(s, onsets, config.segmentation);
        v.windows = make_windows(v.instances, config.segmentation);
        if (config.model == ModelKind::Rf) {
            const auto segments = segment_breaths(s, onsets);
            v.features.resize(v.windows.size());
            v.feature_failures.resize(v.windows.size());
            for (std::size_t w = 0; w < v.windows.size(); ++w) {
                try {
                    v.features[w] = window_features_from_segments(v.windows[w], segments);
                } catch (const DegenerateMorphology& e) {
                    v.feature_failures[w] = e.what();
                }
            }
        }
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.cells.resize(n_tasks * n_epochs);
    for (std::size_t task = 0; task < n_tasks; ++task) {
        for (std::size_t e = 0; e < n_epochs; ++e) {
            MetricCell& c = report.cells[task * n_epochs + e];
            c.trial = task / n_folds;
            c.fold = task % n_folds;
            c.epoch = e + 1;
            c.auc = c.accuracy = c.sensitivity = c.specificity = c.ppv = c.npv = nan;
        }
    }
    std::vector<std::vector<PatientOutcome>> task_patients(n_tasks);

    parallel_for(n_tasks, config.threads, [&](std::size_t task) {
        const std::size_t trial = task / n_folds;
        const std::size_t fold = task % n_folds;
        const SplitAssignment& asg = plans[trial].assignments[fold];
        try {
            // Scores the fold's test patients and fills epoch cell e.
            auto evaluate = [&](std::size_t e, auto&& window_label) {
                std::vector<double> scores;
                std::vector<bool> truth;
                std::vector<bool> predicted;
                std::vector<PatientOutcome> rows;
                for (const auto& id : asg.test) {
                    const std::size_t pi = index_of.at(id);
                    const PatientView& v = views[pi];
                    if (v.windows.empty()) {
                        throw NoWindows("patient '" + id + "' yields no complete windows");
                    }
                    std::vector<bool> labels;
                    labels.reserve(v.windows.size());
                    for (std::size_t w = 0; w < v.windows.size(); ++w) {
                        labels.push_back(window_label(pi, w));
                    }
                    const PatientScore ps = patient_score(labels);
                    scores.push_back(ps.score);
                    truth.push_back(cohort[pi].label == Label::Ards);
                    predicted.push_back(ps.label);
                    PatientOutcome row;
                    row.trial = trial;
                    row.fold = fold;
                    row.patient_id = id;
                    row.truth = cohort[pi].label;
                    row.n_windows = v.windows.size();
                    row.score = ps.score;
                    row.predicted = ps.label;
                    rows.push_back(std::move(row));
                }
                MetricCell& cell = report.cells[task * n_epochs + e];
                cell.auc = roc_auc(scores, truth);
                const ConfusionMetrics cm = confusion_metrics(predicted, truth);
                cell.accuracy = cm.accuracy;
                cell.sensitivity = cm.sensitivity;
                cell.specificity = cm.specificity;
                cell.ppv = cm.ppv;
                cell.npv = cm.npv;
                cell.valid = true;
                if (e + 1 == n_epochs) task_patients[task] = std::move(rows);
            };

            if (config.model == ModelKind::Cnn) {
                const InputMode mode = cnn_mode(config.input);
                std::vector<BreathInstance> train_instances;
                for (const auto& id : asg.train) {
                    const auto& src = views[index_of.at(id)].instances;
                    train_instances.insert(train_instances.end(), src.begin(), src.end());
                }
                const auto balanced = oversample_instances(
                    train_instances,
                    derive_seed(config.master_seed, trial, fold, kTagOversample));
                std::vector<TrainingExample> examples;
                examples.reserve(balanced.size());
                for (const auto& inst : balanced) {
                    examples.push_back(make_example(inst.values, label01(inst.label), mode));
                }

                DenseNet model(config.cnn,
                               derive_seed(config.master_seed, trial, fold, kTagInit));
                TrainConfig tc = config.train;
                tc.seed = derive_seed(config.master_seed, trial, fold, kTagTrain);
                tc.capture_snapshots = false;
                train_cnn(model, examples, tc,
                          [&](std::size_t epoch, DenseNet& m, double) {
                              evaluate(epoch, [&](std::size_t pi, std::size_t w) {
                                  return predict_window(m, views[pi].windows[w], mode).label;
                              });
                          });
            } else {
                // A fold that needs any window whose featurization failed is
                // recorded as invalid with that diagnostic.
                auto check_features = [&](const std::vector<std::string>& ids) {
                    for (const auto& id : ids) {
                        const PatientView& v = views[index_of.at(id)];
                        for (std::size_t w = 0; w < v.windows.size(); ++w) {
                            if (!v.feature_failures[w].empty()) {
                                throw DegenerateMorphology("window " + std::to_string(w) +
                                                           " of patient '" + id +
                                                           "': " + v.feature_failures[w]);
                            }
                        }
                    }
                };
                check_features(asg.train);
                check_features(asg.test);

                std::vector<std::vector<double>> rows;
                std::vector<int> labels;
                for (const auto& id : asg.train) {
                    for (const auto& fv : views[index_of.at(id)].features) {
                        rows.emplace_back(fv.values.begin(), fv.values.end());
                        labels.push_back(label01(fv.label));
                    }
                }
                balance_rows(rows, labels,
                             derive_seed(config.master_seed, trial, fold, kTagOversample));

                ForestConfig fc = config.forest;
                fc.seed = derive_seed(config.master_seed, trial, fold, kTagForest);
                const RandomForest forest = train_random_forest(rows, labels, fc, 1);
                evaluate(0, [&](std::size_t pi, std::size_t w) {
                    const auto& vals = views[pi].features[w].values;
                    return rf_predict_proba(forest,
                                            std::vector<double>(vals.begin(), vals.end())) > 0.5;
                });
            }
        } catch (const Error& err) {
            for (std::size_t e = 0; e < n_epochs; ++e) {
                MetricCell& cell = report.cells[task * n_epochs + e];
                cell.valid = false;
                cell.failure = err.what();
                cell.auc = cell.accuracy = cell.sensitivity = cell.specificity = cell.ppv =
                    cell.npv = nan;
            }
            task_patients[task].clear();
        }
    });

    for (auto& rows : task_patients) {
        for (auto& row : rows) report.patients.push_back(std::move(row));
    }
    for (std::size_t task = 0; task < n_tasks; ++task) {
        if (!report.cells[task * n_epochs + n_epochs - 1].valid) ++report.invalid_folds;
    }

    auto aggregate_of = [&](auto&& getter) {
        std::vector<double> per_trial;
        per_trial.reserve(config.trials);
        for (std::size_t t = 0; t < config.trials; ++t) {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t f = 0; f < n_folds; ++f) {
                const MetricCell& c = report.cells[(t * n_folds + f) * n_epochs + n_epochs - 1];
                if (!c.valid) continue;
                const double v = getter(c);
                if (std::isfinite(v)) {
                    sum += v;
                    ++n;
                }
            }
            per_trial.push_back(n ? sum / static_cast<double>(n) : nan);
        }
        return mean_ci95(per_trial);
    };
    report.aggregate.auc = aggregate_of([](const MetricCell& c) { return c.auc; });
    report.aggregate.accuracy = aggregate_of([](const MetricCell& c) { return c.accuracy; });
    report.aggregate.sensitivity =
        aggregate_of([](const MetricCell& c) { return c.sensitivity; });
    report.aggregate.specificity =
        aggregate_of([](const MetricCell& c) { return c.specificity; });
    report.aggregate.ppv = aggregate_of([](const MetricCell& c) { return c.ppv; });
    report.aggregate.npv = aggregate_of([](const MetricCell& c) { return c.npv; });
    return report;
}

SweepReport ablation_sweep(const std::vector<FlowSeries>& cohort,
                           const ExperimentConfig& base,
                           const std::vector<double>& cutoffs) {
    check_lowpass_cutoffs(cutoffs);

    auto configured = [&](ModelKind model, const double* cutoff) {
        ExperimentConfig cfg = base;
        cfg.model = model;
        if (model == ModelKind::Rf) {
            cfg.input = ExperimentInput::Features;
        } else if (cfg.input == ExperimentInput::Features) {
            cfg.input = ExperimentInput::Raw;
        }
        if (cutoff) {
            AblationBand band;
            band.low_hz = 0.0;
            band.high_hz = *cutoff;
            band.keep_dc = true;
            cfg.ablation = band;
        } else {
            cfg.ablation.reset();
        }
        return cfg;
    };

    SweepReport sweep;
    sweep.entries.reserve(2 + 2 * cutoffs.size());
    for (ModelKind m : {ModelKind::Cnn, ModelKind::Rf}) {
        SweepEntry entry;
        entry.model = m;
        entry.report = run_experiment(cohort, configured(m, nullptr));
        sweep.entries.push_back(std::move(entry));
    }
    for (ModelKind m : {ModelKind::Cnn, ModelKind::Rf}) {
        for (double c : cutoffs) {
            SweepEntry entry;
            entry.model = m;
            entry.filtered = true;
            entry.cutoff_hz = c;
            entry.report = run_experiment(cohort, configured(m, &c));
            sweep.entries.push_back(std::move(entry));
        }
    }
    return sweep;
}

std::vector<FeaturizationCell> featurization_survey(
    const std::vector<FlowSeries>& cohort, const std::vector<double>& cutoffs,
    const SegmentationConfig& segmentation) {
    check_lowpass_cutoffs(cutoffs);

    struct Reference {
        std::vector<std::size_t> onsets;
        std::vector<BreathWindow> windows;
    };
    std::vector<Reference> refs(cohort.size());
    std::size_t n_windows = 0;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        refs[i].onsets = detect_breath_onsets(cohort[i], segmentation);
        const auto instances = make_instances(cohort[i], refs[i].onsets, segmentation);
        refs[i].windows = make_windows(instances, segmentation);
        n_windows += refs[i].windows.size();
    }

    std::vector<FeaturizationCell> out;
    out.reserve(cutoffs.size());
    for (double cutoff : cutoffs) {
        FeaturizationCell cell;
        cell.cutoff_hz = cutoff;
        cell.n_windows = n_windows;
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            FlowSeries filtered = cohort[i];
            filtered.samples = lowpass_ablate(cohort[i].samples, cutoff);
            const auto segments = segment_breaths(filtered, refs[i].onsets);
            for (const auto& window : refs[i].windows) {
                try {
                    (void)window_features_from_segments(window, segments);
                    ++cell.n_ok;
                } catch (const DegenerateMorphology&) {
                    ++cell.n_degenerate;
                }
            }
        }
        out.push_back(cell);
    }
    return out;
}

}  // namespace ards
