#include "ards/report.hpp"

#include "ards/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ards {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

json num_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError(where + ": missing field \"" + key + "\"");
    }
    return obj[key];
}

double read_num(const json& j, const std::string& where) {
    if (j.is_null()) return kNan;
    if (!j.is_number()) throw ParseError(where + ": expected number or null");
    return j.get<double>();
}

std::size_t read_size(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw ParseError(where + ": expected non-negative integer");
    return j.get<std::size_t>();
}

json ci_json(const MeanCi& ci) {
    json j;
    j["mean"] = num_or_null(ci.mean);
    j["half_width"] = num_or_null(ci.half_width);
    j["n"] = ci.n;
    return j;
}

MeanCi ci_from(const json& j, const std::string& where) {
    MeanCi ci;
    ci.mean = read_num(require(j, "mean", where), where + ".mean");
    ci.half_width = read_num(require(j, "half_width", where), where + ".half_width");
    ci.n = read_size(require(j, "n", where), where + ".n");
    return ci;
}

json config_json(const ExperimentConfig& c) {
    json j;
    j["model"] = model_kind_name(c.model);
    j["input"] = experiment_input_name(c.input);
    if (c.ablation) {
        json band;
        band["low_hz"] = c.ablation->low_hz;
        band["high_hz"] = c.ablation->high_hz;
        band["keep_dc"] = c.ablation->keep_dc;
        j["ablation"] = band;
    } else {
        j["ablation"] = nullptr;
    }
    j["scheme"] = split_scheme_name(c.scheme);
    j["folds"] = c.folds;
    j["train_fraction"] = c.train_fraction;
    j["trials"] = c.trials;
    j["master_seed"] = c.master_seed;

    json seg;
    seg["onset_threshold"] = c.segmentation.onset_threshold;
    seg["pre_onset_nonpositive_run"] = c.segmentation.pre_onset_nonpositive_run;
    seg["instance_length"] = c.segmentation.instance_length;
    seg["window_size"] = c.segmentation.window_size;
    j["segmentation"] = seg;

    json cnn;
    cnn["input_channels"] = c.cnn.input_channels;
    cnn["input_length"] = c.cnn.input_length;
    cnn["stem_channels"] = c.cnn.stem_channels;
    cnn["stem_kernel"] = c.cnn.stem_kernel;
    cnn["stem_stride"] = c.cnn.stem_stride;
    cnn["stem_pad"] = c.cnn.stem_pad;
    cnn["pool_kernel"] = c.cnn.pool_kernel;
    cnn["pool_stride"] = c.cnn.pool_stride;
    cnn["pool_pad"] = c.cnn.pool_pad;
    cnn["block_layers"] = c.cnn.block_layers;
    cnn["growth_rate"] = c.cnn.growth_rate;
    cnn["compression"] = c.cnn.compression;
    cnn["n_classes"] = c.cnn.n_classes;
    j["cnn"] = cnn;

    json train;
    train["learning_rate"] = c.train.learning_rate;
    train["momentum"] = c.train.momentum;
    train["batch_size"] = c.train.batch_size;
    train["epochs"] = c.train.epochs;
    j["train"] = train;

    json forest;
    forest["n_trees"] = c.forest.n_trees;
    forest["max_depth"] = c.forest.max_depth;
    forest["min_samples_split"] = c.forest.min_samples_split;
    forest["features_per_split"] = c.forest.features_per_split;
    forest["bootstrap"] = c.forest.bootstrap;
    j["forest"] = forest;
    return j;
}

ExperimentConfig config_from(const json& j, const std::string& where) {
    ExperimentConfig c;
    c.model = model_kind_from_name(require(j, "model", where).get<std::string>());
    c.input = experiment_input_from_name(require(j, "input", where).get<std::string>());
    const json& band = require(j, "ablation", where);
    if (!band.is_null()) {
        AblationBand b;
        b.low_hz = read_num(require(band, "low_hz", where), where + ".ablation.low_hz");
        b.high_hz = read_num(require(band, "high_hz", where), where + ".ablation.high_hz");
        b.keep_dc = require(band, "keep_dc", where).get<bool>();
        c.ablation = b;
    }
    c.scheme = split_scheme_from_name(require(j, "scheme", where).get<std::string>());
    c.folds = read_size(require(j, "folds", where), where + ".folds");
    c.train_fraction = read_num(require(j, "train_fraction", where), where + ".train_fraction");
    c.trials = read_size(require(j, "trials", where), where + ".trials");
    c.master_seed = require(j, "master_seed", where).get<std::uint64_t>();

    const json& seg = require(j, "segmentation", where);
    c.segmentation.onset_threshold =
        read_num(require(seg, "onset_threshold", where), where + ".segmentation");
    c.segmentation.pre_onset_nonpositive_run =
        read_size(require(seg, "pre_onset_nonpositive_run", where), where + ".segmentation");
    c.segmentation.instance_length =
        read_size(require(seg, "instance_length", where), where + ".segmentation");
    c.segmentation.window_size =
        read_size(require(seg, "window_size", where), where + ".segmentation");

    const json& cnn = require(j, "cnn", where);
    c.cnn.input_channels = read_size(require(cnn, "input_channels", where), where + ".cnn");
    c.cnn.input_length = read_size(require(cnn, "input_length", where), where + ".cnn");
    c.cnn.stem_channels = read_size(require(cnn, "stem_channels", where), where + ".cnn");
    c.cnn.stem_kernel = read_size(require(cnn, "stem_kernel", where), where + ".cnn");
    c.cnn.stem_stride = read_size(require(cnn, "stem_stride", where), where + ".cnn");
    c.cnn.stem_pad = read_size(require(cnn, "stem_pad", where), where + ".cnn");
    c.cnn.pool_kernel = read_size(require(cnn, "pool_kernel", where), where + ".cnn");
    c.cnn.pool_stride = read_size(require(cnn, "pool_stride", where), where + ".cnn");
    c.cnn.pool_pad = read_size(require(cnn, "pool_pad", where), where + ".cnn");
    c.cnn.block_layers.clear();
    for (const auto& item : require(cnn, "block_layers", where)) {
        c.cnn.block_layers.push_back(read_size(item, where + ".cnn.block_layers"));
    }
    c.cnn.growth_rate = read_size(require(cnn, "growth_rate", where), where + ".cnn");
    c.cnn.compression = read_num(require(cnn, "compression", where), where + ".cnn");
    c.cnn.n_classes = read_size(require(cnn, "n_classes", where), where + ".cnn");

    const json& train = require(j, "train", where);
    c.train.learning_rate = read_num(require(train, "learning_rate", where), where + ".train");
    c.train.momentum = read_num(require(train, "momentum", where), where + ".train");
    c.train.batch_size = read_size(require(train, "batch_size", where), where + ".train");
    c.train.epochs = read_size(require(train, "epochs", where), where + ".train");

    const json& forest = require(j, "forest", where);
    c.forest.n_trees = read_size(require(forest, "n_trees", where), where + ".forest");
    c.forest.max_depth = read_size(require(forest, "max_depth", where), where + ".forest");
    c.forest.min_samples_split =
        read_size(require(forest, "min_samples_split", where), where + ".forest");
    c.forest.features_per_split =
        read_size(require(forest, "features_per_split", where), where + ".forest");
    c.forest.bootstrap = require(forest, "bootstrap", where).get<bool>();
    return c;
}

json metrics_obj(const MetricsReport& report) {
    json j;
    j["config"] = config_json(report.config);

    json cells = json::array();
    for (const auto& cell : report.cells) {
        json c;
        c["trial"] = cell.trial;
        c["fold"] = cell.fold;
        c["epoch"] = cell.epoch;
        c["auc"] = num_or_null(cell.auc);
        c["accuracy"] = num_or_null(cell.accuracy);
        c["sensitivity"] = num_or_null(cell.sensitivity);
        c["specificity"] = num_or_null(cell.specificity);
        c["ppv"] = num_or_null(cell.ppv);
        c["npv"] = num_or_null(cell.npv);
        c["valid"] = cell.valid;
        c["failure"] = cell.failure;
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);

    json patients = json::array();
    for (const auto& row : report.patients) {
        json p;
        p["trial"] = row.trial;
        p["fold"] = row.fold;
        p["patient_id"] = row.patient_id;
        p["truth"] = label_name(row.truth);
        p["n_windows"] = row.n_windows;
        p["score"] = num_or_null(row.score);
        p["predicted"] = row.predicted;
        patients.push_back(std::move(p));
    }
    j["patients"] = std::move(patients);

    json agg;
    agg["auc"] = ci_json(report.aggregate.auc);
    agg["accuracy"] = ci_json(report.aggregate.accuracy);
    agg["sensitivity"] = ci_json(report.aggregate.sensitivity);
    agg["specificity"] = ci_json(report.aggregate.specificity);
    agg["ppv"] = ci_json(report.aggregate.ppv);
    agg["npv"] = ci_json(report.aggregate.npv);
    j["aggregate"] = std::move(agg);

    j["invalid_folds"] = report.invalid_folds;
    return j;
}

MetricsReport metrics_from(const json& j, const std::string& where) {
    MetricsReport report;
    report.config = config_from(require(j, "config", where), where + ".config");

    std::size_t index = 0;
    for (const auto& c : require(j, "cells", where)) {
        const std::string at = where + ".cells[" + std::to_string(index++) + "]";
        MetricCell cell;
        cell.trial = read_size(require(c, "trial", at), at);
        cell.fold = read_size(require(c, "fold", at), at);
        cell.epoch = read_size(require(c, "epoch", at), at);
        cell.auc = read_num(require(c, "auc", at), at);
        cell.accuracy = read_num(require(c, "accuracy", at), at);
        cell.sensitivity = read_num(require(c, "sensitivity", at), at);
        cell.specificity = read_num(require(c, "specificity", at), at);
        cell.ppv = read_num(require(c, "ppv", at), at);
        cell.npv = read_num(require(c, "npv", at), at);
        cell.valid = require(c, "valid", at).get<bool>();
        cell.failure = require(c, "failure", at).get<std::string>();
        report.cells.push_back(std::move(cell));
    }

    index = 0;
    for (const auto& p : require(j, "patients", where)) {
        const std::string at = where + ".patients[" + std::to_string(index++) + "]";
        PatientOutcome row;
        row.trial = read_size(require(p, "trial", at), at);
        row.fold = read_size(require(p, "fold", at), at);
        row.patient_id = require(p, "patient_id", at).get<std::string>();
        row.truth = label_from_name(require(p, "truth", at).get<std::string>());
        row.n_windows = read_size(require(p, "n_windows", at), at);
        row.score = read_num(require(p, "score", at), at);
        row.predicted = require(p, "predicted", at).get<bool>();
        report.patients.push_back(std::move(row));
    }

    const json& agg = require(j, "aggregate", where);
    const std::string at = where + ".aggregate";
    report.aggregate.auc = ci_from(require(agg, "auc", at), at + ".auc");
    report.aggregate.accuracy = ci_from(require(agg, "accuracy", at), at + ".accuracy");
    report.aggregate.sensitivity = ci_from(require(agg, "sensitivity", at), at + ".sensitivity");
    report.aggregate.specificity = ci_from(require(agg, "specificity", at), at + ".specificity");
    report.aggregate.ppv = ci_from(require(agg, "ppv", at), at + ".ppv");
    report.aggregate.npv = ci_from(require(agg, "npv", at), at + ".npv");

    report.invalid_folds = read_size(require(j, "invalid_folds", where), where);
    return report;
}

json parse_text(const std::string& text, const char* expected_kind) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report document: ") + e.what());
    }
    const json& kind = require(doc, "kind", "report document");
    if (!kind.is_string() || kind.get<std::string>() != expected_kind) {
        throw ParseError(std::string("report document: expected kind \"") + expected_kind +
                         "\"");
    }
    return doc;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string fmt4(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

void csv_metric_pair(std::ostringstream& os, const MeanCi& ci) {
    os << ',' << fmt4(ci.mean) << ',' << fmt4(ci.half_width);
}

// Four Table-2-style columns from one entry's aggregate.
void csv_sweep_row(std::ostringstream& os, const std::string& section,
                   const SweepEntry& entry) {
    os << section << ',' << model_kind_name(entry.model) << ',';
    if (entry.filtered) os << fmt4(entry.cutoff_hz);
    const MetricAggregate& a = entry.report.aggregate;
    csv_metric_pair(os, a.auc);
    csv_metric_pair(os, a.accuracy);
    csv_metric_pair(os, a.sensitivity);
    csv_metric_pair(os, a.specificity);
    os << '\n';
}

std::string svg_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string f2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

double clamp01(double v) {
    return std::min(1.0, std::max(0.0, v));
}

constexpr int kSvgWidth = 640;
constexpr int kSvgHeight = 480;
constexpr double kPlotLeft = 70.0;
constexpr double kPlotTop = 20.0;
constexpr double kPlotWidth = 545.0;
constexpr double kPlotHeight = 395.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#8c564b", "#e377c2"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

void svg_open(std::ostringstream& os) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth
       << "\" height=\"" << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << ' '
       << kSvgHeight << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << kSvgWidth << "\" height=\"" << kSvgHeight
       << "\" fill=\"#ffffff\"/>\n";
}

// Plot frame plus axis titles; tick drawing stays with the callers because
// the two figures use different x scales.
void svg_frame(std::ostringstream& os, const std::string& x_label,
               const std::string& y_label) {
    os << "<rect x=\"" << f2(kPlotLeft) << "\" y=\"" << f2(kPlotTop) << "\" width=\""
       << f2(kPlotWidth) << "\" height=\"" << f2(kPlotHeight)
       << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    os << "<text x=\"" << f2(kPlotLeft + kPlotWidth / 2) << "\" y=\""
       << f2(kPlotTop + kPlotHeight + 42)
       << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">"
       << svg_escape(x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << f2(kPlotTop + kPlotHeight / 2)
       << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\""
       << " transform=\"rotate(-90 18 " << f2(kPlotTop + kPlotHeight / 2) << ")\">"
       << svg_escape(y_label) << "</text>\n";
}

void svg_x_tick(std::ostringstream& os, double px, const std::string& text) {
    os << "<line x1=\"" << f2(px) << "\" y1=\"" << f2(kPlotTop + kPlotHeight)
       << "\" x2=\"" << f2(px) << "\" y2=\"" << f2(kPlotTop + kPlotHeight + 5)
       << "\" stroke=\"#333333\"/>\n";
    os << "<text x=\"" << f2(px) << "\" y=\"" << f2(kPlotTop + kPlotHeight + 20)
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << text
       << "</text>\n";
}

void svg_y_tick(std::ostringstream& os, double py, const std::string& text) {
    os << "<line x1=\"" << f2(kPlotLeft - 5) << "\" y1=\"" << f2(py) << "\" x2=\""
       << f2(kPlotLeft) << "\" y2=\"" << f2(py) << "\" stroke=\"#333333\"/>\n";
    os << "<text x=\"" << f2(kPlotLeft - 9) << "\" y=\"" << f2(py + 4)
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" << text
       << "</text>\n";
}

void svg_band(std::ostringstream& os, const std::vector<double>& px,
              const std::vector<double>& upper, const std::vector<double>& lower,
              const char* color) {
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) {
        os << f2(px[i]) << ',' << f2(upper[i]) << ' ';
    }
    for (std::size_t i = px.size(); i-- > 0;) {
        os << f2(px[i]) << ',' << f2(lower[i]);
        if (i != 0) os << ' ';
    }
    os << "\"/>\n";
}

void svg_line(std::ostringstream& os, const std::vector<double>& px,
              const std::vector<double>& py, const char* color) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (i) os << ' ';
        os << f2(px[i]) << ',' << f2(py[i]);
    }
    os << "\"/>\n";
}

}  // namespace

std::string metrics_report_json(const MetricsReport& report) {
    json doc = metrics_obj(report);
    doc["kind"] = "metrics_report";
    return doc.dump(2) + "\n";
}

MetricsReport metrics_report_from_json(const std::string& text) {
    return metrics_from(parse_text(text, "metrics_report"), "metrics_report");
}

void save_metrics_report(const std::filesystem::path& path, const MetricsReport& report) {
    write_file(path, metrics_report_json(report));
}

MetricsReport load_metrics_report(const std::filesystem::path& path) {
    return metrics_report_from_json(read_file(path));
}

std::string sweep_report_json(const SweepReport& report) {
    json doc;
    doc["kind"] = "sweep_report";
    json entries = json::array();
    for (const auto& entry : report.entries) {
        json e;
        e["model"] = model_kind_name(entry.model);
        e["filtered"] = entry.filtered;
        e["cutoff_hz"] = num_or_null(entry.cutoff_hz);
        e["report"] = metrics_obj(entry.report);
        entries.push_back(std::move(e));
    }
    doc["entries"] = std::move(entries);
    return doc.dump(2) + "\n";
}

SweepReport sweep_report_from_json(const std::string& text) {
    const json doc = parse_text(text, "sweep_report");
    SweepReport report;
    std::size_t index = 0;
    for (const auto& e : require(doc, "entries", "sweep_report")) {
        const std::string at = "sweep_report.entries[" + std::to_string(index++) + "]";
        SweepEntry entry;
        entry.model = model_kind_from_name(require(e, "model", at).get<std::string>());
        entry.filtered = require(e, "filtered", at).get<bool>();
        entry.cutoff_hz = read_num(require(e, "cutoff_hz", at), at + ".cutoff_hz");
        entry.report = metrics_from(require(e, "report", at), at + ".report");
        report.entries.push_back(std::move(entry));
    }
    return report;
}

void save_sweep_report(const std::filesystem::path& path, const SweepReport& report) {
    write_file(path, sweep_report_json(report));
}

SweepReport load_sweep_report(const std::filesystem::path& path) {
    return sweep_report_from_json(read_file(path));
}

std::string fold_table_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "fold,auc_mean,auc_ci95,accuracy_mean,accuracy_ci95,"
          "sensitivity_mean,sensitivity_ci95,specificity_mean,specificity_ci95,"
          "ppv_mean,ppv_ci95,npv_mean,npv_ci95\n";

    std::size_t final_epoch = 0;
    std::size_t n_folds = 0;
    for (const auto& cell : report.cells) {
        final_epoch = std::max(final_epoch, cell.epoch);
        n_folds = std::max(n_folds, cell.fold + 1);
    }

    for (std::size_t f = 0; f < n_folds; ++f) {
        std::vector<double> auc, acc, sens, spec, ppv, npv;
        for (const auto& cell : report.cells) {
            if (cell.fold != f || cell.epoch != final_epoch || !cell.valid) continue;
            auc.push_back(cell.auc);
            acc.push_back(cell.accuracy);
            sens.push_back(cell.sensitivity);
            spec.push_back(cell.specificity);
            ppv.push_back(cell.ppv);
            npv.push_back(cell.npv);
        }
        os << (f + 1);
        csv_metric_pair(os, mean_ci95(auc));
        csv_metric_pair(os, mean_ci95(acc));
        csv_metric_pair(os, mean_ci95(sens));
        csv_metric_pair(os, mean_ci95(spec));
        csv_metric_pair(os, mean_ci95(ppv));
        csv_metric_pair(os, mean_ci95(npv));
        os << '\n';
    }

    os << "mean";
    csv_metric_pair(os, report.aggregate.auc);
    csv_metric_pair(os, report.aggregate.accuracy);
    csv_metric_pair(os, report.aggregate.sensitivity);
    csv_metric_pair(os, report.aggregate.specificity);
    csv_metric_pair(os, report.aggregate.ppv);
    csv_metric_pair(os, report.aggregate.npv);
    os << '\n';
    return os.str();
}

std::string sweep_table_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "section,model,cutoff_hz,auc_mean,auc_ci95,accuracy_mean,accuracy_ci95,"
          "sensitivity_mean,sensitivity_ci95,specificity_mean,specificity_ci95\n";
    for (ModelKind model : {ModelKind::Rf, ModelKind::Cnn}) {
        for (const auto& entry : report.entries) {
            if (entry.model == model && !entry.filtered) {
                csv_sweep_row(os, "baseline", entry);
            }
        }
    }
    for (const auto& entry : report.entries) {
        if (entry.model == ModelKind::Cnn && entry.filtered) {
            csv_sweep_row(os, "cnn_lowpass", entry);
        }
    }
    for (const auto& entry : report.entries) {
        if (entry.model == ModelKind::Rf && entry.filtered) {
            csv_sweep_row(os, "rf_lowpass", entry);
        }
    }
    return os.str();
}

std::string survey_table_csv(const std::vector<FeaturizationCell>& survey) {
    std::ostringstream os;
    os << "cutoff_hz,n_windows,n_ok,n_degenerate\n";
    for (const auto& cell : survey) {
        os << fmt4(cell.cutoff_hz) << ',' << cell.n_windows << ',' << cell.n_ok << ','
           << cell.n_degenerate << '\n';
    }
    return os.str();
}

RocBand roc_band(const MetricsReport& report, const std::string& name,
                 std::size_t grid_points) {
    if (grid_points < 2) throw ConfigInvalid("roc_band needs at least 2 grid points");

    std::map<std::size_t, std::pair<std::vector<double>, std::vector<bool>>> by_trial;
    for (const auto& row : report.patients) {
        auto& [scores, labels] = by_trial[row.trial];
        scores.push_back(row.score);
        labels.push_back(row.truth == Label::Ards);
    }

    std::vector<std::vector<double>> per_trial;
    for (const auto& [trial, data] : by_trial) {
        std::vector<RocPoint> pts;
        try {
            pts = roc_curve(data.first, data.second);
        } catch (const SingleClass&) {
            continue;  // no curve from a one-class test pool, like its NaN AUC
        }
        std::vector<double> tpr(grid_points, 0.0);
        std::size_t pi = 0;
        double cur = 0.0;
        for (std::size_t g = 0; g < grid_points; ++g) {
            const double f = static_cast<double>(g) / static_cast<double>(grid_points - 1);
            while (pi < pts.size() && pts[pi].fpr <= f) {
                cur = std::max(cur, pts[pi].tpr);
                ++pi;
            }
            tpr[g] = cur;
        }
        per_trial.push_back(std::move(tpr));
    }
    if (per_trial.empty()) {
        throw InsufficientSamples("roc_band: no trial had a two-class test pool");
    }

    RocBand band;
    band.name = name;
    band.auc = report.aggregate.auc;
    band.fpr.resize(grid_points);
    band.tpr.resize(grid_points);
    std::vector<double> column(per_trial.size());
    for (std::size_t g = 0; g < grid_points; ++g) {
        band.fpr[g] = static_cast<double>(g) / static_cast<double>(grid_points - 1);
        for (std::size_t t = 0; t < per_trial.size(); ++t) column[t] = per_trial[t][g];
        band.tpr[g] = mean_ci95(column);
    }
    return band;
}

std::string roc_svg(const std::vector<RocBand>& bands) {
    if (bands.empty()) throw ConfigInvalid("roc_svg needs at least one band");
    for (const auto& band : bands) {
        if (band.fpr.size() != band.tpr.size() || band.fpr.size() < 2) {
            throw DimensionMismatch("roc_svg: band \"" + band.name +
                                    "\" has mismatched or too-short fpr/tpr");
        }
    }

    const auto px = [](double u) { return kPlotLeft + u * kPlotWidth; };
    const auto py = [](double v) { return kPlotTop + (1.0 - v) * kPlotHeight; };

    std::ostringstream os;
    svg_open(os);
    svg_frame(os, "False positive rate", "True positive rate");
    for (int i = 0; i <= 5; ++i) {
        const double v = static_cast<double>(i) / 5.0;
        std::ostringstream t;
        t << std::fixed << std::setprecision(1) << v;
        svg_x_tick(os, px(v), t.str());
        svg_y_tick(os, py(v), t.str());
    }
    os << "<line x1=\"" << f2(px(0)) << "\" y1=\"" << f2(py(0)) << "\" x2=\"" << f2(px(1))
       << "\" y2=\"" << f2(py(1))
       << "\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n";

    for (std::size_t b = 0; b < bands.size(); ++b) {
        const auto& band = bands[b];
        const char* color = kPalette[b % kPaletteSize];
        std::vector<double> xs(band.fpr.size()), upper(band.fpr.size()),
            lower(band.fpr.size()), mid(band.fpr.size());
        for (std::size_t i = 0; i < band.fpr.size(); ++i) {
            xs[i] = px(band.fpr[i]);
            upper[i] = py(clamp01(band.tpr[i].mean + band.tpr[i].half_width));
            lower[i] = py(clamp01(band.tpr[i].mean - band.tpr[i].half_width));
            mid[i] = py(clamp01(band.tpr[i].mean));
        }
        svg_band(os, xs, upper, lower, color);
        svg_line(os, xs, mid, color);
    }

    // Legend in the lower-right quadrant, where ROC curves leave room.
    const double legend_x = kPlotLeft + kPlotWidth * 0.42;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const double y = kPlotTop + kPlotHeight - 16.0 - 20.0 * static_cast<double>(bands.size() - 1 - b);
        const char* color = kPalette[b % kPaletteSize];
        os << "<line x1=\"" << f2(legend_x) << "\" y1=\"" << f2(y - 4) << "\" x2=\""
           << f2(legend_x + 26) << "\" y2=\"" << f2(y - 4) << "\" stroke=\"" << color
           << "\" stroke-width=\"3\"/>\n";
        os << "<text x=\"" << f2(legend_x + 34) << "\" y=\"" << f2(y)
           << "\" font-family=\"sans-serif\" font-size=\"13\">"
           << svg_escape(bands[b].name) << " (AUC " << fmt4(bands[b].auc.mean)
           << " &#177; " << fmt4(bands[b].auc.half_width) << ")</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string cam_svg(const std::vector<double>& x, const CamBand& band,
                    const std::string& x_label) {
    if (x.empty() || x.size() != band.mean.size() || x.size() != band.ci_half.size()) {
        throw DimensionMismatch("cam_svg: x, mean, and ci_half must share one length");
    }
    const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
    const double x_min = *min_it;
    const double x_max = *max_it;
    if (!(x_max > x_min)) {
        throw ConfigInvalid("cam_svg: x coordinates span zero width");
    }

    const auto px = [&](double u) {
        return kPlotLeft + (u - x_min) / (x_max - x_min) * kPlotWidth;
    };
    const auto py = [](double v) { return kPlotTop + (1.0 - v) * kPlotHeight; };

    std::ostringstream os;
    svg_open(os);
    svg_frame(os, x_label, "Average Grad-CAM intensity");
    for (int i = 0; i <= 5; ++i) {
        const double frac = static_cast<double>(i) / 5.0;
        std::ostringstream tx;
        tx << std::fixed << std::setprecision(1) << (x_min + frac * (x_max - x_min));
        svg_x_tick(os, px(x_min + frac * (x_max - x_min)), tx.str());
        std::ostringstream ty;
        ty << std::fixed << std::setprecision(1) << frac;
        svg_y_tick(os, py(frac), ty.str());
    }

    const char* color = kPalette[0];
    std::vector<double> xs(x.size()), upper(x.size()), lower(x.size()), mid(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = px(x[i]);
        upper[i] = py(clamp01(band.mean[i] + band.ci_half[i]));
        lower[i] = py(clamp01(band.mean[i] - band.ci_half[i]));
        mid[i] = py(clamp01(band.mean[i]));
    }
    svg_band(os, xs, upper, lower, color);
    svg_line(os, xs, mid, color);
    os << "</svg>\n";
    return os.str();
}

}  // namespace ards
