#include "ards/metrics.hpp"

#include "ards/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ards {

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double p = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error("student_t_quantile: p must be in (0, 1)");
    }
    if (p == 0.5) return 0.0;
    // CDF is monotone; bisect on a bracket that covers any practical quantile
    double lo = -1e6;
    double hi = 1e6;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

MeanCi mean_ci95(const std::vector<double>& values) {
    std::vector<double> finite;
    finite.reserve(values.size());
    for (double v : values) {
        if (std::isfinite(v)) finite.push_back(v);
    }
    MeanCi out;
    out.n = finite.size();
    if (finite.empty()) {
        out.mean = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.mean = std::accumulate(finite.begin(), finite.end(), 0.0) /
               static_cast<double>(finite.size());
    if (finite.size() < 2) return out;
    double ss = 0.0;
    for (double v : finite) {
        double d = v - out.mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / static_cast<double>(finite.size() - 1));
    double tq = student_t_quantile(0.975, static_cast<double>(finite.size() - 1));
    out.half_width = tq * sd / std::sqrt(static_cast<double>(finite.size()));
    return out;
}

PatientScore patient_score(const std::vector<bool>& window_labels) {
    if (window_labels.empty()) throw NoWindows("patient has no breath windows");
    std::size_t positives = 0;
    for (bool w : window_labels) {
        if (w) ++positives;
    }
    PatientScore out;
    out.score = static_cast<double>(positives) /
                static_cast<double>(window_labels.size());
    out.label = out.score > 0.5;
    return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionMismatch("roc_auc: scores and labels differ in length");
    }
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    for (bool l : labels) {
        (l ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass("roc_auc requires both classes");
    }

    // rank-sum formulation with midranks for ties
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank_sum_pos += midrank;
        }
        i = j;
    }
    double np = static_cast<double>(n_pos);
    double nn = static_cast<double>(n_neg);
    double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

ConfusionMetrics confusion_metrics(const std::vector<bool>& predicted,
                                   const std::vector<bool>& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionMismatch("confusion_metrics: length mismatch");
    }
    double tp = 0.0;
    double tn = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        if (truth[k]) {
            (predicted[k] ? tp : fn) += 1.0;
        } else {
            (predicted[k] ? fp : tn) += 1.0;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ConfusionMetrics m;
    double n = tp + tn + fp + fn;
    m.accuracy = n > 0.0 ? (tp + tn) / n : nan;
    m.sensitivity = (tp + fn) > 0.0 ? tp / (tp + fn) : nan;
    m.specificity = (tn + fp) > 0.0 ? tn / (tn + fp) : nan;
    m.ppv = (tp + fp) > 0.0 ? tp / (tp + fp) : nan;
    m.npv = (tn + fn) > 0.0 ? tn / (tn + fn) : nan;
    return m;
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<bool>& labels) {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    for (bool l : labels) {
        (l ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass("roc_curve requires both classes");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                ++tp;
            } else {
                ++fp;
            }
        }
        pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
        i = j;
    }
    return pts;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("series lengths differ: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) throw DimensionMismatch("correlation needs at least two points");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace ards
