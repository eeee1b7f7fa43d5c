#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cli.hpp"
#include "selpred/calibration.hpp"
#include "selpred/errors.hpp"
#include "selpred/metrics.hpp"
#include "selpred/records.hpp"
#include "selpred/report.hpp"
#include "selpred/signals.hpp"
#include "selpred/synth.hpp"

namespace py = pybind11;
using namespace selpred;

namespace {

using Doubles = std::vector<double>;
using Labels = std::vector<int>;

std::vector<std::pair<double, double>> curve_points(const RiskCoverageCurve& curve) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : curve.points) {
        out.emplace_back(p.coverage, p.risk);
    }
    return out;
}

EvalConfig config_from(const py::object& source) {
    if (py::isinstance<py::dict>(source)) {
        const auto json = py::module_::import("json").attr("dumps")(source).cast<std::string>();
        return parse_eval_config(json);
    }
    return load_eval_config(source.cast<std::filesystem::path>());
}

}  // namespace

PYBIND11_MODULE(_selpred, m) {
    m.doc() = "Selective-prediction confidence signals, metrics and report tables";

    auto base = py::register_exception<Error>(m, "SelpredError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
    py::register_exception<StatisticsError>(m, "StatisticsError", base.ptr());

    // Metrics
    m.def("auroc", [](const Doubles& c, const Labels& y) { return auroc(c, y); }, py::arg("confidences"),
          py::arg("labels"));
    m.def("aurc", [](const Doubles& c, const Labels& y) { return aurc(c, y); }, py::arg("confidences"),
          py::arg("labels"));
    m.def("risk_coverage_curve", [](const Doubles& c, const Labels& y) { return curve_points(risk_coverage_curve(c, y)); },
          py::arg("confidences"), py::arg("labels"), "List of (coverage, risk) pairs starting at (0, 1).");
    m.def("err_at_coverage", [](const Doubles& c, const Labels& y, double t) { return err_at_coverage(c, y, t); },
          py::arg("confidences"), py::arg("labels"), py::arg("target"));
    m.def("cov_at_error", [](const Doubles& c, const Labels& y, double r) { return cov_at_error(c, y, r); },
          py::arg("confidences"), py::arg("labels"), py::arg("max_risk"));
    m.def("brier", [](const Doubles& c, const Labels& y) { return brier(c, y); }, py::arg("confidences"),
          py::arg("labels"));
    m.def("ece", [](const Doubles& c, const Labels& y, std::size_t bins) { return ece(c, y, bins); },
          py::arg("confidences"), py::arg("labels"), py::arg("bins") = 10);
    m.def("auroc_bruteforce", [](const Doubles& c, const Labels& y) { return oracle::auroc_bruteforce(c, y); },
          py::arg("confidences"), py::arg("labels"));
    m.def("aurc_bruteforce", [](const Doubles& c, const Labels& y) { return oracle::aurc_bruteforce(c, y); },
          py::arg("confidences"), py::arg("labels"));

    // Signals
    m.def("softmax", [](const Doubles& s, double t) { return softmax(s, t); }, py::arg("scores"),
          py::arg("temperature") = 1.0);
    m.def("sigmoid", &sigmoid, py::arg("x"));
    m.def(
        "self_verify_confidence",
        [](const Doubles& true_logits, const Doubles& false_logits) {
            VerifyLogits logits;
            logits.true_logits = true_logits;
            logits.false_logits = false_logits;
            return self_verify_confidence(logits);
        },
        py::arg("true_logits"), py::arg("false_logits"));
    m.def("signal_names", [] {
        std::vector<std::string> names;
        for (const Signal s : all_signals()) {
            names.emplace_back(signal_name(s));
        }
        return names;
    });

    // Calibration and statistics
    py::class_<TemperatureFit>(m, "TemperatureFit")
        .def_readonly("temperature", &TemperatureFit::temperature)
        .def_readonly("calibration_nll", &TemperatureFit::calibration_nll)
        .def_readonly("iterations", &TemperatureFit::iterations);
    m.def(
        "fit_temperature",
        [](const std::vector<Doubles>& scores, const Labels& gold, const std::vector<std::size_t>& indices) {
            return fit_temperature(scores, gold, indices);
        },
        py::arg("scores"), py::arg("gold"), py::arg("indices"));
    m.def(
        "temperature_nll",
        [](const std::vector<Doubles>& scores, const Labels& gold, const std::vector<std::size_t>& indices, double t) {
            return temperature_nll(scores, gold, indices, t);
        },
        py::arg("scores"), py::arg("gold"), py::arg("indices"), py::arg("temperature"));
    m.def(
        "split_calibration",
        [](std::size_t n, double fraction, std::size_t minimum, std::int64_t seed) {
            const auto split = split_calibration(n, fraction, minimum, seed);
            return std::make_pair(split.calibration_indices, split.evaluation_indices);
        },
        py::arg("n"), py::arg("fraction") = 0.2, py::arg("minimum") = 50, py::arg("seed") = 42,
        "Returns (calibration_indices, evaluation_indices).");

    py::class_<BootstrapResult>(m, "BootstrapResult")
        .def_readonly("mean_delta", &BootstrapResult::mean_delta)
        .def_readonly("ci_low", &BootstrapResult::ci_low)
        .def_readonly("ci_high", &BootstrapResult::ci_high)
        .def_readonly("kept_replicates", &BootstrapResult::kept_replicates)
        .def_readonly("discarded_replicates", &BootstrapResult::discarded_replicates)
        .def_readonly("requested_replicates", &BootstrapResult::requested_replicates)
        .def_readonly("seed", &BootstrapResult::seed);
    m.def(
        "bootstrap_delta_auroc",
        [](const Doubles& a, const Doubles& b, const Labels& y, std::size_t replicates, std::int64_t seed) {
            BootstrapOptions options;
            options.replicates = replicates;
            options.seed = seed;
            py::gil_scoped_release release;
            return bootstrap_delta_auroc(a, b, y, options);
        },
        py::arg("conf_a"), py::arg("conf_b"), py::arg("labels"), py::arg("replicates") = 2000, py::arg("seed") = 42);

    // Runs
    py::class_<RunManifest>(m, "RunManifest")
        .def_readonly("dataset_name", &RunManifest::dataset_name)
        .def_readonly("model_id", &RunManifest::model_id)
        .def_readonly("prompt_variants", &RunManifest::prompt_variants)
        .def_readonly("example_count", &RunManifest::example_count)
        .def_readonly("seed", &RunManifest::seed)
        .def_property_readonly("dataset_display", &RunManifest::dataset_display)
        .def_property_readonly("model_display", &RunManifest::model_display);
    py::class_<ValidationSummary>(m, "ValidationSummary")
        .def_readonly("unknown_field_warnings", &ValidationSummary::unknown_field_warnings)
        .def_readonly("discarded_examples", &ValidationSummary::discarded_examples)
        .def_readonly("verify_prediction_mismatches", &ValidationSummary::verify_prediction_mismatches);
    py::class_<ValidatedRun>(m, "Run")
        .def_readonly("manifest", &ValidatedRun::manifest)
        .def_readonly("summary", &ValidatedRun::summary)
        .def("__len__", &ValidatedRun::size)
        .def("records_jsonl", [](const ValidatedRun& run) {
            std::string out;
            for (const auto& record : run.records) {
                out += serialize_record_line(record) + "\n";
            }
            return out;
        });
    m.def("load_run", &load_run, py::arg("directory"));
    m.def(
        "generate_run",
        [](std::size_t n, std::size_t options, double quality, double accuracy, std::int64_t seed,
           double likelihood_quality) {
            SynthSpec spec;
            spec.n_examples = n;
            spec.n_options = options;
            spec.signal_quality = quality;
            spec.accuracy_target = accuracy;
            spec.seed = seed;
            spec.likelihood_quality = likelihood_quality;
            return generate_run(spec);
        },
        py::arg("n"), py::arg("options"), py::arg("quality"), py::arg("accuracy"), py::arg("seed"),
        py::arg("likelihood_quality") = 0.0);
    m.def(
        "write_run",
        [](const std::filesystem::path& dir, const ValidatedRun& run) { write_run(dir, run.manifest, run.records); },
        py::arg("directory"), py::arg("run"));

    // Reports
    py::class_<MetricReport>(m, "MetricReport")
        .def_readonly("dataset", &MetricReport::dataset)
        .def_readonly("model", &MetricReport::model)
        .def_readonly("prompt", &MetricReport::prompt)
        .def_property_readonly("signal", [](const MetricReport& r) { return std::string(signal_name(r.signal)); })
        .def_readonly("n", &MetricReport::n)
        .def_readonly("accuracy", &MetricReport::accuracy)
        .def_readonly("auroc", &MetricReport::auroc)
        .def_readonly("aurc", &MetricReport::aurc)
        .def_readonly("brier", &MetricReport::brier)
        .def_readonly("ece10", &MetricReport::ece10)
        .def("err_at", &MetricReport::err_at, py::arg("target"))
        .def("cov_at", &MetricReport::cov_at, py::arg("max_risk"))
        .def("__repr__", [](const MetricReport& r) {
            std::ostringstream s;
            s << "<MetricReport " << r.dataset << " / " << r.model << " / " << r.prompt << " / "
              << signal_name(r.signal) << " n=" << r.n << ">";
            return s.str();
        });
    py::class_<DeltaRow>(m, "DeltaRow")
        .def_readonly("dataset", &DeltaRow::dataset)
        .def_readonly("model", &DeltaRow::model)
        .def_readonly("prompt", &DeltaRow::prompt)
        .def_readonly("d_auroc_sv_llavg", &DeltaRow::d_auroc_sv_llavg)
        .def_readonly("d_aurc_sv_llavg", &DeltaRow::d_aurc_sv_llavg)
        .def_readonly("d_auroc_sv_llsum", &DeltaRow::d_auroc_sv_llsum)
        .def_readonly("d_aurc_sv_llsum", &DeltaRow::d_aurc_sv_llsum);
    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("reports", &EvalResult::reports)
        .def_readonly("deltas", &EvalResult::deltas)
        .def_property_readonly("main_table", [](const EvalResult& r) { return render_text(main_table(r.reports)); })
        .def_property_readonly("main_table_csv", [](const EvalResult& r) { return render_csv(main_table(r.reports)); });

    m.def(
        "evaluate",
        [](const py::object& config_source, const std::vector<std::filesystem::path>& run_dirs, bool bootstrap) {
            EvalConfig config = config_from(config_source);
            if (!run_dirs.empty()) {
                config.run_directories = run_dirs;
            }
            config.bootstrap.enabled = config.bootstrap.enabled && bootstrap;
            py::gil_scoped_release release;
            return evaluate(config);
        },
        py::arg("config") = py::dict(), py::arg("run_dirs") = std::vector<std::filesystem::path>{},
        py::arg("bootstrap") = true, "config is a dict with the config-file keys or a path to a config file.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
