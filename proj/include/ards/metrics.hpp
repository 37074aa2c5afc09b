#pragma once

#include <cstddef>
#include <vector>

namespace ards {

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Cumulative distribution of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Upper quantile t such that P(T <= t) = p, for p in (0, 1).
double student_t_quantile(double p, double df);

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // two-sided 95% t-interval half-width; 0 when n < 2
    std::size_t n = 0;
};

// Mean with a two-sided 95% t-interval over the finite entries of values.
// Non-finite entries (undefined PPV/NPV cells) are excluded.
MeanCi mean_ci95(const std::vector<double>& values);

// Fraction of windows labeled positive.  The patient is called ARDS only on
// a strict majority (score > 0.5); an exact tie is non-ARDS.
struct PatientScore {
    double score = 0.0;
    bool label = false;
};
PatientScore patient_score(const std::vector<bool>& window_labels);

// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(equal) over all
// positive/negative pairs.  Computed by ranking; ties handled exactly.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct ConfusionMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double ppv = 0.0;  // NaN when no positive predictions
    double npv = 0.0;  // NaN when no negative predictions
};

ConfusionMetrics confusion_metrics(const std::vector<bool>& predicted,
                                   const std::vector<bool>& truth);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// ROC curve as a step function over descending score thresholds, beginning
// at (0,0) and ending at (1,1).
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<bool>& labels);

// Pearson correlation of two equal-length series (n >= 2, else
// DimensionMismatch).  A constant series carries no positional information,
// so correlation against it is reported as 0.
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ards
