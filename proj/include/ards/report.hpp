#pragma once

#include "ards/experiment.hpp"
#include "ards/gradcam.hpp"
#include "ards/metrics.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ards {

// Report documents on disk are JSON.  Doubles keep their exact value
// (shortest round-trip formatting, keys sorted), so a document is a
// deterministic function of the report contents alone; not-a-number metrics
// are stored as null and read back as NaN.  Scheduling and per-task state
// (thread count, derived seeds, snapshot capture) are not part of a
// document: the same experiment run on any thread count writes the same
// bytes.
std::string metrics_report_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const std::string& text);
void save_metrics_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport load_metrics_report(const std::filesystem::path& path);

std::string sweep_report_json(const SweepReport& report);
SweepReport sweep_report_from_json(const std::string& text);
void save_sweep_report(const std::filesystem::path& path, const SweepReport& report);
SweepReport load_sweep_report(const std::filesystem::path& path);

// CSV tables.  All real numbers print with fixed four decimals; undefined
// values print as "nan".

// Per-fold metric table.  Header:
//   fold,auc_mean,auc_ci95,accuracy_mean,accuracy_ci95,sensitivity_mean,
//   sensitivity_ci95,specificity_mean,specificity_ci95,ppv_mean,ppv_ci95,
//   npv_mean,npv_ci95
// One row per fold (1-based), each metric the mean and 95% t-interval
// half-width over that fold's valid final-epoch cells across trials, then a
// closing "mean" row restating the report aggregate.
std::string fold_table_csv(const MetricsReport& report);

// Ablation sweep table in three sections.  Header:
//   section,model,cutoff_hz,auc_mean,auc_ci95,accuracy_mean,accuracy_ci95,
//   sensitivity_mean,sensitivity_ci95,specificity_mean,specificity_ci95
// Section order: "baseline" (rf then cnn, blank cutoff), "cnn_lowpass",
// "rf_lowpass", the lowpass sections one row per cutoff in sweep order.
std::string sweep_table_csv(const SweepReport& report);

// Featurization survey table.  Header: cutoff_hz,n_windows,n_ok,n_degenerate
std::string survey_table_csv(const std::vector<FeaturizationCell>& survey);

// ROC curve with a confidence band by vertical averaging: each trial's
// pooled patient scores yield one ROC step function, sampled on a fixed
// false-positive-rate grid; the band is the per-grid-point mean and 95%
// t-interval of true positive rate across trials.  Trials whose test
// patients are single-class contribute no curve (mirroring their undefined
// per-fold AUC); at least one usable trial is required
// (InsufficientSamples otherwise).  ConfigInvalid for fewer than two grid
// points.
struct RocBand {
    std::string name;         // legend label
    std::vector<double> fpr;  // grid, 0 to 1 inclusive
    std::vector<MeanCi> tpr;  // per grid point, across trials
    MeanCi auc;               // report aggregate, for the legend
};
RocBand roc_band(const MetricsReport& report, const std::string& name,
                 std::size_t grid_points = 101);

// Self-contained SVG figures (no external references, fixed two-decimal
// coordinates, so output bytes depend only on the inputs).

// ROC plot on the unit square: chance diagonal, one mean line plus shaded
// CI band per entry, legend giving each entry's AUC with its interval.
// Requires at least one band with matching fpr/tpr lengths.
std::string roc_svg(const std::vector<RocBand>& bands);

// Class-averaged saliency across instance positions: mean line with shaded
// CI band on a fixed [0,1] intensity axis, against caller-supplied x
// coordinates (frequency in Hz for spectral inputs) with an axis label.
// Band values are clipped to the intensity axis.  DimensionMismatch unless
// x, mean, and ci_half have the same nonzero length.
std::string cam_svg(const std::vector<double>& x, const CamBand& band,
                    const std::string& x_label);

}  // namespace ards
