#pragma once

#include "ards/cnn.hpp"
#include "ards/flow.hpp"
#include "ards/forest.hpp"
#include "ards/metrics.hpp"
#include "ards/segmentation.hpp"
#include "ards/spectral.hpp"
#include "ards/splits.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ards {

enum class ModelKind { Cnn, Rf };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);  // throws ParseError

// What the classifier consumes per breath instance.  The first three feed the
// CNN as channel stacks; Features feeds the forest with per-window medians of
// the ten expert features.
enum class ExperimentInput { Raw, Fft, RawPlusFft, Features };

std::string experiment_input_name(ExperimentInput input);
ExperimentInput experiment_input_from_name(const std::string& name);  // ParseError

struct ExperimentConfig {
    ModelKind model = ModelKind::Cnn;
    ExperimentInput input = ExperimentInput::Raw;

    // Applied to each patient's whole raw series before instance extraction,
    // so the model inputs and the expert features see the same filtered
    // physiology.  Breath onsets are detected on the unfiltered recording
    // and the filtered series is sliced at those anchors: the onset rule's
    // sharp non-positive-to-threshold jump cannot survive a brick-wall
    // passband, and fixed anchors keep every cutoff comparable over the same
    // breaths.
    std::optional<AblationBand> ablation;

    SplitScheme scheme = SplitScheme::KFold;
    std::size_t folds = 5;        // k-fold schemes
    double train_fraction = 0.7;  // holdout / bootstrap
    std::size_t trials = 10;

    std::uint64_t master_seed = 0;
    unsigned threads = 1;

    SegmentationConfig segmentation;
    DenseNetConfig cnn = DenseNetConfig::desk();
    TrainConfig train;     // seed is replaced per (trial, fold)
    ForestConfig forest;   // likewise

    // Throws ConfigInvalid: RF requires Features input, the CNN excludes it,
    // and trials/folds/epochs must be positive.
    void validate() const;
};

// One evaluated (trial, fold, epoch).  A fold that failed mid-pipeline (for
// example DegenerateMorphology during featurization of filtered data) keeps
// its cells with valid = false and the diagnostic in `failure`, so the report
// still accounts for every scheduled fold.
struct MetricCell {
    std::size_t trial = 0;
    std::size_t fold = 0;
    std::size_t epoch = 0;  // 1-based; forests evaluate once as epoch 1
    double auc = 0.0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double ppv = 0.0;  // NaN when the fold predicted no positives
    double npv = 0.0;  // NaN when the fold predicted no negatives
    bool valid = false;
    std::string failure;
};

// Final-epoch score trace for one test patient of one (trial, fold).
struct PatientOutcome {
    std::size_t trial = 0;
    std::size_t fold = 0;
    std::string patient_id;
    Label truth = Label::NonArds;
    std::size_t n_windows = 0;
    double score = 0.0;       // ARDS-labeled window fraction
    bool predicted = false;   // score > 0.5, strict
};

struct MetricAggregate {
    MeanCi auc, accuracy, sensitivity, specificity, ppv, npv;
};

struct MetricsReport {
    ExperimentConfig config;
    std::vector<MetricCell> cells;          // ordered by (trial, fold, epoch)
    std::vector<PatientOutcome> patients;   // ordered by (trial, fold), cohort order
    // Final-epoch summary: each trial contributes the mean over its valid
    // folds (finite cells only), and the 95% t-interval runs over trials.
    MetricAggregate aggregate;
    std::size_t invalid_folds = 0;
};

// Evaluates one model / input / filter configuration over every (trial,
// fold): segment, filter, oversample the training side only, train, then
// score test patients per epoch.  Patient-disjoint sides come from the split
// plan; window labels use the strict > 0.5 rules at both the window and the
// patient level.  All task randomness derives from (master_seed, trial,
// fold), so reports are bitwise-identical across repeats and thread counts.
// K-fold keeps one fold assignment for all trials; random k-fold, holdout,
// and bootstrap redraw per trial.
MetricsReport run_experiment(const std::vector<FlowSeries>& cohort,
                             const ExperimentConfig& config);

// One (model, optional lowpass cutoff) row of the sweep.
struct SweepEntry {
    ModelKind model = ModelKind::Cnn;
    bool filtered = false;
    double cutoff_hz = 0.0;  // meaningful when filtered
    MetricsReport report;
};

struct SweepReport {
    // Unfiltered CNN and RF baselines first, then the CNN at every cutoff,
    // then the RF at every cutoff (the three-sub-table layout).
    std::vector<SweepEntry> entries;
};

// Runs the base configuration for both models, unfiltered and lowpass-ablated
// at each cutoff (0 < cutoff <= 25 Hz).  Every entry shares base.master_seed,
// so the split plans and per-task random streams are identical across
// cutoffs; metric differences between entries reflect the filtering alone.
SweepReport ablation_sweep(const std::vector<FlowSeries>& cohort,
                           const ExperimentConfig& base,
                           const std::vector<double>& cutoffs);

// How often per-window featurization survives a lowpass filter.  Windows are
// fixed on the unfiltered recordings and the filtered series is featurized
// over those same sample ranges, so every cutoff is scored against one
// denominator; re-detecting onsets on heavily filtered data would instead
// yield no windows at all and nothing to count.
struct FeaturizationCell {
    double cutoff_hz = 0.0;
    std::size_t n_windows = 0;
    std::size_t n_ok = 0;
    std::size_t n_degenerate = 0;
};

std::vector<FeaturizationCell> featurization_survey(
    const std::vector<FlowSeries>& cohort, const std::vector<double>& cutoffs,
    const SegmentationConfig& segmentation);

}  // namespace ards
