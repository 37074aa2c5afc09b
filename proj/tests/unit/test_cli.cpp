// End-to-end checks of the ardsw binary.  Every case launches the real
// executable (path injected by the build as ARDSW_BIN) as a subprocess and
// verifies exit codes, stream prefixes, and the artifacts written to disk,
// cross-checking file contents against the library where that is cheap.
#include <doctest.h>

#include "ards/error.hpp"
#include "ards/features.hpp"
#include "ards/flow.hpp"
#include "ards/forest.hpp"
#include "ards/report.hpp"
#include "ards/segmentation.hpp"
#include "ards/spectral.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using namespace ards;

namespace {

const fs::path& scratch_root() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "flow-cli-tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs `ardsw <args>` through the shell, capturing both streams.  An
// optional prefix such as "env -u ARDSW_OUT" or "env ARDSW_OUT=/x"
// controls the child's environment.
RunResult run_cli(const std::string& args, const std::string& launcher = "") {
    static int seq = 0;
    const fs::path out_log = scratch_root() / ("stdout_" + std::to_string(seq) + ".log");
    const fs::path err_log = scratch_root() / ("stderr_" + std::to_string(seq) + ".log");
    ++seq;
    std::string cmd;
    if (!launcher.empty()) cmd += launcher + " ";
    cmd += std::string(ARDSW_BIN) + " " + args + " >" + out_log.string() + " 2>" +
           err_log.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_log);
    r.err = slurp(err_log);
    return r;
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.rfind(prefix, 0) == 0;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Shared 3 + 3 patient cohort with a strong respiratory-rate separation so
// the forest models built on it actually discriminate.  Generated through
// the binary itself, once, on first use.
const fs::path& demo_cohort() {
    static const fs::path dir = [] {
        const fs::path d = scratch_root() / "cohort";
        const RunResult r = run_cli("synth --out " + d.string() +
                                    " --patients 3 --duration 120 --seed 42"
                                    " --rr-non 14 --rr-ards 19");
        REQUIRE(r.code == 0);
        REQUIRE(r.out.find("patients: 6") != std::string::npos);
        return d;
    }();
    return dir;
}

CohortManifest demo_manifest() { return load_manifest(demo_cohort() / "manifest.json"); }

// First flow file of the given class in the demo cohort.
fs::path demo_flow(Label label) {
    for (const auto& entry : demo_manifest().entries) {
        if (entry.label == label) return entry.flow_file;
    }
    REQUIRE(false);
    return {};
}

// A metrics report document produced by `ardsw evaluate` on the demo
// cohort, reused by the rendering cases.
const fs::path& demo_metrics_doc() {
    static const fs::path doc = [] {
        const fs::path p = scratch_root() / "demo_rf_report.json";
        const RunResult r = run_cli("evaluate --model rf --cohort " +
                                    demo_cohort().string() + " --out " + p.string() +
                                    " --k 3 --trials 2 --trees 30 --seed 7");
        REQUIRE(r.code == 0);
        REQUIRE(r.out.find("report: " + p.string()) != std::string::npos);
        return p;
    }();
    return doc;
}

}  // namespace

TEST_CASE("cli: parse failures exit 2 with a usage line") {
    const RunResult none = run_cli("");
    CHECK(none.code == 2);
    CHECK(starts_with(none.err, "ardsw: usage: "));

    const RunResult unknown = run_cli("frobnicate");
    CHECK(unknown.code == 2);
    CHECK(starts_with(unknown.err, "ardsw: usage: "));

    const RunResult bad_flag = run_cli("segment --no-such-flag x");
    CHECK(bad_flag.code == 2);
    CHECK(starts_with(bad_flag.err, "ardsw: usage: "));

    const RunResult missing_required = run_cli("segment");
    CHECK(missing_required.code == 2);
    CHECK(missing_required.err.find("--flow") != std::string::npos);

    // --cutoff and --low/--high are mutually exclusive; the conflict is a
    // parse error even though the input files do not exist.
    const RunResult conflict =
        run_cli("filter --flow x --out y --cutoff 2 --low 1 --high 3");
    CHECK(conflict.code == 2);

    const RunResult bad_choice =
        run_cli("evaluate --cohort x --out y --scheme nonsense");
    CHECK(bad_choice.code == 2);

    const RunResult help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("Ventilator-flow ARDS detection workbench") != std::string::npos);
    CHECK(help.err.empty());
}

TEST_CASE("cli: runtime failures exit 1 with the error kind") {
    const RunResult missing_flow =
        run_cli("segment --flow " + (scratch_root() / "absent.txt").string());
    CHECK(missing_flow.code == 1);
    CHECK(starts_with(missing_flow.err, "ardsw: error: IoError: "));

    const RunResult missing_cohort =
        run_cli("featurize --cohort " + (scratch_root() / "no-such-dir").string());
    CHECK(missing_cohort.code == 1);
    CHECK(starts_with(missing_cohort.err, "ardsw: error: IoError: "));

    const fs::path junk = scratch_root() / "junk_model.json";
    { std::ofstream(junk) << "this is not a model\n"; }
    const RunResult bad_model = run_cli("predict-rf --model " + junk.string() +
                                        " --flow " + demo_flow(Label::Ards).string());
    CHECK(bad_model.code == 1);
    CHECK(starts_with(bad_model.err, "ardsw: error: "));

    // filter with neither --cutoff nor --low/--high is a usage error, found
    // only after the flow file loads.
    const RunResult no_band = run_cli("filter --flow " + demo_flow(Label::Ards).string() +
                                      " --out " + (scratch_root() / "f.txt").string());
    CHECK(no_band.code == 2);
    CHECK(starts_with(no_band.err, "ardsw: usage: "));
}

TEST_CASE("cli: synth writes a deterministic, loadable cohort") {
    const fs::path a = scratch_root() / "synth_a";
    const fs::path b = scratch_root() / "synth_b";
    const fs::path c = scratch_root() / "synth_c";
    const std::string flags = " --patients 2 --duration 30 --seed 5";
    CHECK(run_cli("synth --out " + a.string() + flags).code == 0);
    CHECK(run_cli("synth --out " + b.string() + flags).code == 0);
    CHECK(run_cli("synth --out " + c.string() + " --patients 2 --duration 30 --seed 6").code == 0);

    const auto relative_files = [](const fs::path& root) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
        }
        std::sort(files.begin(), files.end());
        return files;
    };

    const auto in_a = relative_files(a);
    REQUIRE(in_a == relative_files(b));
    REQUIRE_FALSE(in_a.empty());
    bool differs_from_c = false;
    for (const auto& rel : in_a) {
        CHECK(slurp(a / rel) == slurp(b / rel));
        if (fs::exists(c / rel) && slurp(a / rel) != slurp(c / rel)) differs_from_c = true;
    }
    CHECK(differs_from_c);

    const CohortManifest manifest = load_manifest(a / "manifest.json");
    REQUIRE(manifest.entries.size() == 4);
    for (const auto& series : load_cohort(manifest)) {
        CHECK(series.samples.size() == 30u * kSampleRateHz);
    }
}

TEST_CASE("cli: segment reports onset and window counts for one recording") {
    const fs::path flow = demo_flow(Label::NonArds);
    const RunResult r = run_cli("segment --flow " + flow.string());
    REQUIRE(r.code == 0);

    const nlohmann::json doc = nlohmann::json::parse(r.out);
    CHECK(doc.at("patient_id").get<std::string>() == flow.stem().string());
    CHECK(doc.at("n_samples").get<std::size_t>() == 120u * kSampleRateHz);
    const auto onsets = doc.at("onsets").get<std::vector<std::size_t>>();
    CHECK_FALSE(onsets.empty());
    const auto n_instances = doc.at("n_instances").get<std::size_t>();
    CHECK(n_instances <= onsets.size());
    CHECK(doc.at("n_windows").get<std::size_t>() == n_instances / 20);

    // The library sees the same recording the same way.
    ManifestEntry entry;
    entry.patient_id = flow.stem().string();
    entry.flow_file = flow;
    const FlowSeries series = load_flow_series(entry);
    CHECK(detect_breath_onsets(series, SegmentationConfig{}) == onsets);

    // --out redirects the document to a file.
    const fs::path out = scratch_root() / "segment.json";
    const RunResult to_file = run_cli("segment --flow " + flow.string() +
                                      " --out " + out.string());
    REQUIRE(to_file.code == 0);
    CHECK(starts_with(to_file.out, "wrote: " + out.string()));
    CHECK(nlohmann::json::parse(slurp(out)) == doc);
}

TEST_CASE("cli: filter matches the library ablation bitwise") {
    const fs::path flow = demo_flow(Label::Ards);
    ManifestEntry entry;
    entry.patient_id = flow.stem().string();
    entry.flow_file = flow;
    const FlowSeries raw = load_flow_series(entry);

    const fs::path lp_path = scratch_root() / "lowpassed.txt";
    const RunResult lp = run_cli("filter --flow " + flow.string() + " --out " +
                                 lp_path.string() + " --cutoff 2");
    REQUIRE(lp.code == 0);
    CHECK(lp.out.find("samples: " + std::to_string(raw.samples.size())) !=
          std::string::npos);
    ManifestEntry lp_entry;
    lp_entry.flow_file = lp_path;
    CHECK(load_flow_series(lp_entry).samples == lowpass_ablate(raw.samples, 2.0));

    const fs::path band_path = scratch_root() / "band.txt";
    REQUIRE(run_cli("filter --flow " + flow.string() + " --out " + band_path.string() +
                    " --low 10 --high 12 --drop-dc")
                .code == 0);
    AblationBand band;
    band.low_hz = 10.0;
    band.high_hz = 12.0;
    band.keep_dc = false;
    ManifestEntry band_entry;
    band_entry.flow_file = band_path;
    CHECK(load_flow_series(band_entry).samples == band_ablate(raw.samples, band));
}

TEST_CASE("cli: featurize emits feature rows and the cutoff survey") {
    const RunResult rows = run_cli("featurize --cohort " + demo_cohort().string());
    REQUIRE(rows.code == 0);
    const auto row_lines = lines_of(rows.out);
    REQUIRE_FALSE(row_lines.empty());

    std::string header = "patient_id,label,window";
    for (const auto& name : feature_names()) header += "," + name;
    CHECK(row_lines.front() == header);

    // One row per clean window; recompute the expected count in-process.
    std::size_t expected_rows = 0;
    for (const auto& series : load_cohort(demo_manifest())) {
        const auto onsets = detect_breath_onsets(series, SegmentationConfig{});
        const auto instances = make_instances(series, onsets, SegmentationConfig{});
        const auto windows = make_windows(instances, SegmentationConfig{});
        const auto segments = segment_breaths(series, onsets);
        for (const auto& window : windows) {
            try {
                window_features_from_segments(window, segments);
                ++expected_rows;
            } catch (const DegenerateMorphology&) {
            }
        }
    }
    REQUIRE(expected_rows > 0);
    CHECK(row_lines.size() == expected_rows + 1);
    for (std::size_t i = 1; i < row_lines.size(); ++i) {
        CHECK(std::count(row_lines[i].begin(), row_lines[i].end(), ',') ==
              static_cast<long>(2 + feature_names().size()));
    }

    const RunResult survey =
        run_cli("featurize --cohort " + demo_cohort().string() + " --cutoffs 25,0.25");
    REQUIRE(survey.code == 0);
    const auto survey_lines = lines_of(survey.out);
    REQUIRE(survey_lines.size() == 3);
    CHECK(survey_lines[0] == "cutoff_hz,n_windows,n_ok,n_degenerate");
    CHECK(starts_with(survey_lines[1], "25.0000,"));
    CHECK(starts_with(survey_lines[2], "0.2500,"));
    for (std::size_t i = 1; i < survey_lines.size(); ++i) {
        std::istringstream in(survey_lines[i]);
        std::string cutoff, n_windows, n_ok, n_degenerate;
        std::getline(in, cutoff, ',');
        std::getline(in, n_windows, ',');
        std::getline(in, n_ok, ',');
        std::getline(in, n_degenerate, ',');
        CHECK(std::stoul(n_ok) + std::stoul(n_degenerate) == std::stoul(n_windows));
    }
    // The full band keeps every window; a 0.25 Hz cutoff wrecks morphology.
    CHECK(survey_lines[1].find(",0") == survey_lines[1].size() - 2);
    CHECK(std::stoul(lines_of(survey.out)[2].substr(survey_lines[2].rfind(',') + 1)) > 0);
}

TEST_CASE("cli: model training and scoring round-trips through saved files") {
    // Random forest: train, reload through the library, score a recording.
    const fs::path rf_path = scratch_root() / "demo_rf.json";
    const RunResult rf = run_cli("train-rf --cohort " + demo_cohort().string() +
                                 " --out " + rf_path.string() + " --trees 25 --seed 3");
    REQUIRE(rf.code == 0);
    CHECK(rf.out.find("model: " + rf_path.string()) != std::string::npos);
    CHECK(rf.out.find("rows: ") != std::string::npos);
    CHECK(rf.out.find("oob_accuracy: ") != std::string::npos);
    CHECK(load_forest(rf_path).trees.size() == 25);

    const RunResult scored = run_cli("predict-rf --model " + rf_path.string() +
                                     " --flow " + demo_flow(Label::Ards).string());
    REQUIRE(scored.code == 0);
    const nlohmann::json verdict = nlohmann::json::parse(scored.out);
    const auto probabilities =
        verdict.at("window_probabilities").get<std::vector<double>>();
    CHECK(probabilities.size() == verdict.at("n_scored").get<std::size_t>());
    CHECK(verdict.at("n_scored").get<std::size_t>() >= 1);
    const double score = verdict.at("score").get<double>();
    CHECK(score >= 0.0);
    CHECK(score <= 1.0);
    const std::string label = verdict.at("label").get<std::string>();
    CHECK((label == "ards" || label == "non_ards"));

    // CNN: one epoch is enough to exercise the loop, the loss CSV, and the
    // model file; Grad-CAM then renders from the saved weights.
    const fs::path cnn_path = scratch_root() / "demo_cnn.json";
    const RunResult cnn = run_cli("train-cnn --cohort " + demo_cohort().string() +
                                  " --out " + cnn_path.string() + " --epochs 1 --seed 3");
    REQUIRE(cnn.code == 0);
    const auto cnn_lines = lines_of(cnn.out);
    REQUIRE(cnn_lines.size() >= 4);
    CHECK(cnn_lines[0] == "epoch,mean_loss");
    CHECK(starts_with(cnn_lines[1], "1,"));
    CHECK(cnn_lines[2] == "model: " + cnn_path.string());
    CHECK(starts_with(cnn_lines[3], "examples: "));

    // A lowpass changes sample content but not the breath anchors, so the
    // example count is identical.
    const fs::path cut_path = scratch_root() / "demo_cnn_cut.json";
    const RunResult cut = run_cli("train-cnn --cohort " + demo_cohort().string() +
                                  " --out " + cut_path.string() +
                                  " --epochs 1 --seed 3 --cutoff 2");
    REQUIRE(cut.code == 0);
    CHECK(lines_of(cut.out).back() == cnn_lines[3]);

    const fs::path svg_path = scratch_root() / "cam.svg";
    const fs::path csv_path = scratch_root() / "cam.csv";
    const RunResult cam = run_cli("gradcam --model " + cnn_path.string() + " --cohort " +
                                  demo_cohort().string() + " --out " + svg_path.string() +
                                  " --csv " + csv_path.string() + " --input raw");
    REQUIRE(cam.code == 0);
    const std::string svg = slurp(svg_path);
    CHECK(starts_with(svg, "<svg"));
    CHECK(svg.find("Position (sample)") != std::string::npos);
    const auto cam_lines = lines_of(slurp(csv_path));
    REQUIRE(cam_lines.size() == 225);  // header + one row per instance position
    CHECK(cam_lines[0] == "position,x,mean,ci95");
    CHECK(starts_with(cam_lines[1], "0,0.0000,"));
}

TEST_CASE("cli: evaluate writes a document the library loads back") {
    const MetricsReport report = load_metrics_report(demo_metrics_doc());
    CHECK(report.config.model == ModelKind::Rf);
    CHECK(report.config.input == ExperimentInput::Features);
    CHECK(report.config.folds == 3);
    CHECK(report.config.trials == 2);
    CHECK(report.config.master_seed == 7);
    CHECK(report.config.forest.n_trees == 30);
    CHECK_FALSE(report.config.ablation.has_value());
    CHECK(report.cells.size() == 6);  // 2 trials x 3 folds, one epoch each
    CHECK(report.invalid_folds == 0);
    CHECK(report.aggregate.auc.n == 2);
    CHECK(std::isfinite(report.aggregate.auc.mean));
    CHECK_FALSE(report.patients.empty());
    for (const auto& patient : report.patients) {
        CHECK((starts_with(patient.patient_id, "a0") ||
               starts_with(patient.patient_id, "n0")));
    }

    // The stdout summary mirrors the aggregate block.
    const RunResult again = run_cli("evaluate --model rf --cohort " +
                                    demo_cohort().string() + " --out " +
                                    (scratch_root() / "again.json").string() +
                                    " --k 3 --trials 2 --trees 30 --seed 7");
    REQUIRE(again.code == 0);
    CHECK(again.out.find("metric,mean,ci95\n") != std::string::npos);
    CHECK(again.out.find("auc,") != std::string::npos);
    CHECK(again.out.find("invalid_folds,0\n") != std::string::npos);
    CHECK(slurp(scratch_root() / "again.json") == slurp(demo_metrics_doc()));
}

TEST_CASE("cli: report renders fold tables, an roc figure, and a sweep table") {
    const fs::path out_dir = scratch_root() / "rendered";
    const RunResult render = run_cli("report --metrics " + demo_metrics_doc().string() +
                                     " --names quick --out " + out_dir.string());
    REQUIRE(render.code == 0);
    const std::string folds = slurp(out_dir / "quick_folds.csv");
    CHECK(starts_with(folds,
                      "fold,auc_mean,auc_ci95,accuracy_mean,accuracy_ci95,"
                      "sensitivity_mean,sensitivity_ci95,specificity_mean,"
                      "specificity_ci95,ppv_mean,ppv_ci95,npv_mean,npv_ci95\n"));
    const std::string roc = slurp(out_dir / "roc.svg");
    CHECK(starts_with(roc, "<svg"));
    CHECK(roc.find("quick") != std::string::npos);

    // Duplicate documents with no names fall back to the model name and get
    // deduplicated file stems.
    const fs::path dup_dir = scratch_root() / "rendered_dup";
    const RunResult dup = run_cli("report --metrics " + demo_metrics_doc().string() +
                                  " --metrics " + demo_metrics_doc().string() +
                                  " --out " + dup_dir.string());
    REQUIRE(dup.code == 0);
    CHECK(fs::exists(dup_dir / "rf_folds.csv"));
    CHECK(fs::exists(dup_dir / "rf_2_folds.csv"));

    // Sweep documents re-render to the exact table the sweep printed.
    const fs::path sweep_doc = scratch_root() / "sweep_report.json";
    const RunResult sweep = run_cli("ablation-sweep --cohort " + demo_cohort().string() +
                                    " --out " + sweep_doc.string() +
                                    " --cutoffs 25 --k 3 --trials 1 --epochs 1"
                                    " --trees 25 --seed 3");
    REQUIRE(sweep.code == 0);
    const std::string printed_table =
        sweep.out.substr(sweep.out.find("section,model,cutoff_hz"));
    CHECK(lines_of(printed_table).size() == 5);  // header + rf/cnn base + 2 cutoff rows

    const fs::path sweep_dir = scratch_root() / "rendered_sweep";
    const RunResult rendered_sweep = run_cli("report --sweep " + sweep_doc.string() +
                                             " --out " + sweep_dir.string());
    REQUIRE(rendered_sweep.code == 0);
    CHECK(slurp(sweep_dir / "sweep.csv") == printed_table);

    // Neither --metrics nor --sweep is a usage error.
    CHECK(run_cli("report --out " + out_dir.string()).code == 2);
}

TEST_CASE("cli: ARDSW_OUT supplies the default output directory") {
    const fs::path env_dir = scratch_root() / "env_out";
    const RunResult with_env = run_cli("synth --patients 1 --duration 10 --seed 1",
                                       "env ARDSW_OUT=" + env_dir.string());
    REQUIRE(with_env.code == 0);
    CHECK(with_env.out.find("manifest: " + (env_dir / "manifest.json").string()) !=
          std::string::npos);
    CHECK(fs::exists(env_dir / "manifest.json"));

    const RunResult no_env = run_cli("synth --patients 1 --duration 10 --seed 1",
                                     "env -u ARDSW_OUT");
    CHECK(no_env.code == 2);
    CHECK(starts_with(no_env.err, "ardsw: usage: "));
    CHECK(no_env.err.find("--out") != std::string::npos);

    // An explicit --out wins over the environment.
    const fs::path flag_dir = scratch_root() / "flag_out";
    const RunResult with_flag =
        run_cli("synth --patients 1 --duration 10 --seed 1 --out " + flag_dir.string(),
                "env ARDSW_OUT=" + env_dir.string());
    REQUIRE(with_flag.code == 0);
    CHECK(fs::exists(flag_dir / "manifest.json"));
}

TEST_CASE("cli: evaluate documents are byte-identical across thread counts") {
    const auto evaluate = [](const std::string& model, const std::string& threads,
                             const fs::path& out) {
        const RunResult r = run_cli("--threads " + threads + " evaluate --model " + model +
                                    " --cohort " + demo_cohort().string() + " --out " +
                                    out.string() +
                                    " --k 3 --trials 1 --epochs 1 --trees 25 --seed 13");
        REQUIRE(r.code == 0);
        return slurp(out);
    };
    const std::string rf_one = evaluate("rf", "1", scratch_root() / "rf_t1.json");
    const std::string rf_three = evaluate("rf", "3", scratch_root() / "rf_t3.json");
    CHECK(rf_one == rf_three);

    const std::string cnn_one = evaluate("cnn", "1", scratch_root() / "cnn_t1.json");
    const std::string cnn_two = evaluate("cnn", "2", scratch_root() / "cnn_t2.json");
    CHECK(cnn_one == cnn_two);
    CHECK(cnn_one != rf_one);
}
