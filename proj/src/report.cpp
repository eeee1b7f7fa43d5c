#include "selpred/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "selpred/errors.hpp"

namespace selpred {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::array kKnownConfigKeys = {"run_directories",  "signals",      "prompt_variants",
                                         "coverage_targets", "risk_targets", "bootstrap",
                                         "temperature",      "output_directory", "threads"};

template <typename T>
T config_value(const json& object, const char* key, const char* what) {
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: '") + key + "' must be " + what);
    }
}

void check_keys(const json& object, std::initializer_list<std::string_view> known, const std::string& context) {
    for (const auto& item : object.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
            throw ConfigError(context + ": unknown key '" + item.key() + "'");
        }
    }
}

std::string percent_label(double fraction) {
    const double percent = std::round(fraction * 100.0 * 1e6) / 1e6;
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), percent);
    return std::string(buffer, result.ptr);
}

std::string err_header(double target) { return "err@" + percent_label(target) + "%cov"; }
std::string cov_header(double max_risk) { return "cov@" + percent_label(max_risk) + "%err"; }

// Display width in code points; headers may contain UTF-8 (e.g. "Δ").
std::size_t display_width(const std::string& text) {
    std::size_t width = 0;
    for (const unsigned char c : text) {
        if ((c & 0xC0U) != 0x80U) {
            ++width;
        }
    }
    return width;
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) {
        return cell;
    }
    std::string out = "\"";
    for (const char c : cell) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void ensure_directory(const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) {
        throw IoError("cannot create " + path.string() + ": " + ec.message());
    }
}

using RowKey = std::tuple<std::string, std::string, std::string>;

RowKey key_of(const MetricReport& r) { return {r.dataset, r.model, r.prompt}; }

struct Column {
    std::string header;
    Signal signal;
    std::function<std::optional<double>(const MetricReport&)> value;
};

// One row per (dataset, model, prompt); columns pick a metric of one signal.
// Columns whose signal never appears are dropped and listed in a note.
Table pivot_by_prompt(std::string name, std::span<const MetricReport> reports, const std::vector<Column>& columns) {
    std::map<RowKey, std::map<Signal, const MetricReport*>> grouped;
    std::set<Signal> present;
    for (const auto& report : reports) {
        grouped[key_of(report)][report.signal] = &report;
        present.insert(report.signal);
    }

    Table table;
    table.name = std::move(name);
    table.headers = {"Dataset", "Model", "Prompt"};
    table.key_columns = 3;
    std::vector<const Column*> kept;
    std::vector<std::string> omitted;
    for (const auto& column : columns) {
        if (present.contains(column.signal)) {
            kept.push_back(&column);
            table.headers.push_back(column.header);
        } else {
            omitted.push_back(column.header);
        }
    }
    if (!omitted.empty()) {
        std::string note = "omitted columns (signal not evaluated):";
        for (const auto& header : omitted) {
            note += " " + header + ";";
        }
        note.pop_back();
        table.notes.push_back(note);
    }
    for (const auto& [key, by_signal] : grouped) {
        std::vector<std::string> row{std::get<0>(key), std::get<1>(key), std::get<2>(key)};
        for (const Column* column : kept) {
            const auto it = by_signal.find(column->signal);
            row.push_back(format_cell(it == by_signal.end() ? std::nullopt : column->value(*it->second)));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::optional<double> get_accuracy(const MetricReport& r) { return r.accuracy; }
std::optional<double> get_auroc(const MetricReport& r) { return r.auroc; }
std::optional<double> get_aurc(const MetricReport& r) { return r.aurc; }
std::optional<double> get_brier(const MetricReport& r) { return r.brier; }
std::optional<double> get_ece(const MetricReport& r) { return r.ece10; }

std::optional<double> difference(std::optional<double> a, std::optional<double> b) {
    if (!a || !b) {
        return std::nullopt;
    }
    return *a - *b;
}

std::vector<Signal> variant_free_signals(const EvalConfig& config) {
    std::vector<Signal> out;
    for (const Signal s : config.signals) {
        if (s != Signal::SelfVerify) {
            out.push_back(s);
        }
    }
    return out;
}

bool wants(const EvalConfig& config, Signal signal) {
    return std::find(config.signals.begin(), config.signals.end(), signal) != config.signals.end();
}

struct RunOutput {
    std::vector<MetricReport> reports;
    std::vector<BootstrapRow> bootstrap;
    std::vector<CurveRow> curves;
    std::optional<TemperatureRow> temperature;
};

RunOutput evaluate_one(const ValidatedRun& run, const EvalConfig& config) {
    RunOutput out;
    const std::string dataset = run.manifest.dataset_display();
    const std::string model = run.manifest.model_display();
    const auto variants = config.prompt_variants.empty() ? run.manifest.prompt_variants : config.prompt_variants;
    const MetricTargets targets{config.coverage_targets, config.risk_targets};

    FrameRequest shared;
    shared.signals = variant_free_signals(config);
    if (wants(config, Signal::LlAvgT)) {
        if (run.size() < 2) {
            // Temperature scaling needs a calibration and an evaluation example.
            std::erase(shared.signals, Signal::LlAvgT);
        } else {
            const auto split = split_calibration(run.size(), config.temperature.fraction,
                                                 config.temperature.minimum, config.temperature.seed);
            std::vector<std::vector<double>> scores;
            std::vector<int> gold;
            for (const auto& record : run.records) {
                scores.push_back(averaged_scores(record));
                gold.push_back(static_cast<int>(record.gold_index));
            }
            const auto fit = fit_temperature(scores, gold, split.calibration_indices);
            shared.temperature = fit.temperature;
            shared.temperature_positions = split.evaluation_indices;
            out.temperature = TemperatureRow{dataset, model, fit, split.calibration_indices.size(),
                                             split.evaluation_indices.size()};
        }
    }
    const auto shared_frames = build_signal_frames(run, shared);
    std::vector<MetricReport> shared_reports;
    for (const auto& frame : shared_frames) {
        shared_reports.push_back(compute_report(frame, targets));
    }

    const SignalFrame* llavg_frame = nullptr;
    for (const auto& frame : shared_frames) {
        if (frame.signal == Signal::LlAvg) {
            llavg_frame = &frame;
        }
    }

    for (const auto& variant : variants) {
        // Variant-independent signals are computed once and repeated per prompt.
        for (std::size_t i = 0; i < shared_frames.size(); ++i) {
            MetricReport report = shared_reports[i];
            report.dataset = dataset;
            report.model = model;
            report.prompt = variant;
            out.reports.push_back(std::move(report));
            const auto& frame = shared_frames[i];
            out.curves.push_back(
                {dataset, model, variant, frame.signal, risk_coverage_curve(frame.confidences, frame.labels)});
        }
        if (!wants(config, Signal::SelfVerify)) {
            continue;
        }
        FrameRequest request;
        request.signals = {Signal::SelfVerify};
        request.variant = variant;
        const auto sv = build_signal_frames(run, request).front();
        MetricReport report = compute_report(sv, targets);
        report.dataset = dataset;
        report.model = model;
        report.prompt = variant;
        out.reports.push_back(std::move(report));
        out.curves.push_back({dataset, model, variant, Signal::SelfVerify, risk_coverage_curve(sv.confidences, sv.labels)});

        if (config.bootstrap.enabled && llavg_frame != nullptr) {
            BootstrapRow row{dataset, model, variant, std::nullopt, ""};
            try {
                BootstrapOptions options;
                options.replicates = config.bootstrap.replicates;
                options.seed = config.bootstrap.seed;
                row.result = bootstrap_delta_auroc(sv.confidences, llavg_frame->confidences, sv.labels, options);
            } catch (const DegenerateInputError& e) {
                row.note = e.what();
            } catch (const StatisticsError& e) {
                row.note = e.what();
            }
            out.bootstrap.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace

EvalConfig parse_eval_config(std::string_view text, const std::filesystem::path& base_directory) {
    json object;
    try {
        object = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!object.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    for (const auto& item : object.items()) {
        if (std::find(kKnownConfigKeys.begin(), kKnownConfigKeys.end(), item.key()) == kKnownConfigKeys.end()) {
            throw ConfigError("config: unknown key '" + item.key() + "'");
        }
    }

    EvalConfig config;
    if (object.contains("run_directories")) {
        for (const auto& dir : config_value<std::vector<std::string>>(object, "run_directories", "a list of paths")) {
            std::filesystem::path path(dir);
            if (path.is_relative() && !base_directory.empty()) {
                path = base_directory / path;
            }
            config.run_directories.push_back(path.lexically_normal());
        }
    }
    if (object.contains("signals")) {
        config.signals.clear();
        for (const auto& name : config_value<std::vector<std::string>>(object, "signals", "a list of signal names")) {
            config.signals.push_back(parse_signal(name));
        }
    }
    if (object.contains("prompt_variants")) {
        config.prompt_variants = config_value<std::vector<std::string>>(object, "prompt_variants", "a list of strings");
    }
    if (object.contains("coverage_targets")) {
        config.coverage_targets = config_value<std::vector<double>>(object, "coverage_targets", "a list of numbers");
    }
    if (object.contains("risk_targets")) {
        config.risk_targets = config_value<std::vector<double>>(object, "risk_targets", "a list of numbers");
    }
    if (object.contains("bootstrap")) {
        const json& b = object["bootstrap"];
        if (!b.is_object()) {
            throw ConfigError("config: 'bootstrap' must be an object");
        }
        check_keys(b, {"replicates", "seed", "enabled"}, "config.bootstrap");
        if (b.contains("replicates")) {
            config.bootstrap.replicates = config_value<std::size_t>(b, "replicates", "a positive integer");
        }
        if (b.contains("seed")) {
            config.bootstrap.seed = config_value<std::int64_t>(b, "seed", "an integer");
        }
        if (b.contains("enabled")) {
            config.bootstrap.enabled = config_value<bool>(b, "enabled", "a boolean");
        }
    }
    if (object.contains("temperature")) {
        const json& t = object["temperature"];
        if (!t.is_object()) {
            throw ConfigError("config: 'temperature' must be an object");
        }
        check_keys(t, {"fraction", "minimum", "seed"}, "config.temperature");
        if (t.contains("fraction")) {
            config.temperature.fraction = config_value<double>(t, "fraction", "a number");
        }
        if (t.contains("minimum")) {
            config.temperature.minimum = config_value<std::size_t>(t, "minimum", "a nonnegative integer");
        }
        if (t.contains("seed")) {
            config.temperature.seed = config_value<std::int64_t>(t, "seed", "an integer");
        }
    }
    if (object.contains("output_directory")) {
        std::filesystem::path path(config_value<std::string>(object, "output_directory", "a path"));
        if (path.is_relative() && !base_directory.empty()) {
            path = base_directory / path;
        }
        config.output_directory = path.lexically_normal();
    }
    if (object.contains("threads")) {
        config.threads = config_value<unsigned>(object, "threads", "a nonnegative integer");
    }
    return config;
}

EvalConfig load_eval_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_eval_config(buffer.str(), path.parent_path());
}

std::string serialize_eval_config(const EvalConfig& config) {
    ordered_json out;
    std::vector<std::string> dirs;
    for (const auto& dir : config.run_directories) {
        dirs.push_back(dir.generic_string());
    }
    out["run_directories"] = dirs;
    std::vector<std::string> signals;
    for (const Signal s : config.signals) {
        signals.emplace_back(signal_name(s));
    }
    out["signals"] = signals;
    out["prompt_variants"] = config.prompt_variants;
    out["coverage_targets"] = config.coverage_targets;
    out["risk_targets"] = config.risk_targets;
    out["bootstrap"] = {{"replicates", config.bootstrap.replicates},
                        {"seed", config.bootstrap.seed},
                        {"enabled", config.bootstrap.enabled}};
    out["temperature"] = {{"fraction", config.temperature.fraction},
                          {"minimum", config.temperature.minimum},
                          {"seed", config.temperature.seed}};
    return out.dump(2) + "\n";
}

namespace {

// Everything except the run list, which in-memory evaluation does not use.
void validate_settings(const EvalConfig& config) {
    if (config.signals.empty()) {
        throw ConfigError("config: at least one signal is required");
    }
    for (const double t : config.coverage_targets) {
        if (!(t > 0.0 && t <= 1.0)) {
            throw ConfigError("config: coverage targets must lie in (0, 1]");
        }
    }
    for (const double t : config.risk_targets) {
        if (!(t > 0.0 && t <= 1.0)) {
            throw ConfigError("config: risk targets must lie in (0, 1]");
        }
    }
    if (config.bootstrap.enabled && config.bootstrap.replicates == 0) {
        throw ConfigError("config: bootstrap.replicates must be positive");
    }
    if (!(config.temperature.fraction > 0.0 && config.temperature.fraction <= 1.0)) {
        throw ConfigError("config: temperature.fraction must lie in (0, 1]");
    }
}

}  // namespace

void validate_eval_config(const EvalConfig& config) {
    if (config.run_directories.empty()) {
        throw ConfigError("config: at least one run directory is required");
    }
    validate_settings(config);
}

void sort_reports(std::vector<MetricReport>& reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const MetricReport& a, const MetricReport& b) {
        return std::make_tuple(a.dataset, a.model, a.prompt, signal_name(a.signal)) <
               std::make_tuple(b.dataset, b.model, b.prompt, signal_name(b.signal));
    });
}

std::vector<DeltaRow> compute_deltas(std::span<const MetricReport> reports) {
    std::map<RowKey, std::map<Signal, const MetricReport*>> grouped;
    for (const auto& report : reports) {
        grouped[key_of(report)][report.signal] = &report;
    }
    std::vector<DeltaRow> rows;
    for (const auto& [key, by_signal] : grouped) {
        const auto sv = by_signal.find(Signal::SelfVerify);
        const auto avg = by_signal.find(Signal::LlAvg);
        const auto sum = by_signal.find(Signal::LlSum);
        if (sv == by_signal.end() || (avg == by_signal.end() && sum == by_signal.end())) {
            continue;
        }
        DeltaRow row;
        std::tie(row.dataset, row.model, row.prompt) = key;
        if (avg != by_signal.end()) {
            row.d_auroc_sv_llavg = difference(sv->second->auroc, avg->second->auroc);
            row.d_aurc_sv_llavg = sv->second->aurc - avg->second->aurc;
        }
        if (sum != by_signal.end()) {
            row.d_auroc_sv_llsum = difference(sv->second->auroc, sum->second->auroc);
            row.d_aurc_sv_llsum = sv->second->aurc - sum->second->aurc;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

EvalResult evaluate_runs(std::span<const ValidatedRun> runs, const EvalConfig& config,
                         std::span<const std::filesystem::path> directories) {
    validate_settings(config);
    std::set<std::pair<std::string, std::string>> identities;
    for (const auto& run : runs) {
        if (!identities.emplace(run.manifest.dataset_display(), run.manifest.model_display()).second) {
            throw ConfigError("duplicate run identity (" + run.manifest.dataset_display() + ", " +
                              run.manifest.model_display() + ")");
        }
    }

    unsigned threads = config.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : config.threads;
    std::vector<RunOutput> outputs(runs.size());
    if (threads <= 1 || runs.size() <= 1) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            outputs[i] = evaluate_one(runs[i], config);
        }
    } else {
        // Each run is independent; results are merged and sorted afterwards,
        // so completion order never reaches the output.
        std::vector<std::future<RunOutput>> pending;
        std::size_t next = 0;
        while (next < runs.size() || !pending.empty()) {
            while (next < runs.size() && pending.size() < threads) {
                pending.push_back(std::async(std::launch::async, evaluate_one, std::cref(runs[next]), std::cref(config)));
                ++next;
            }
            const std::size_t first = next - pending.size();
            for (std::size_t j = 0; j < pending.size(); ++j) {
                outputs[first + j] = pending[j].get();
            }
            pending.clear();
        }
    }

    EvalResult result;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto& out = outputs[i];
        std::move(out.reports.begin(), out.reports.end(), std::back_inserter(result.reports));
        std::move(out.bootstrap.begin(), out.bootstrap.end(), std::back_inserter(result.bootstrap));
        std::move(out.curves.begin(), out.curves.end(), std::back_inserter(result.curves));
        if (out.temperature) {
            result.temperatures.push_back(*out.temperature);
        }
        RunSummaryRow summary;
        summary.dataset = runs[i].manifest.dataset_display();
        summary.model = runs[i].manifest.model_display();
        summary.directory = i < directories.size() ? directories[i].generic_string() : "";
        summary.examples = runs[i].size();
        summary.summary = runs[i].summary;
        result.runs.push_back(std::move(summary));
    }
    sort_reports(result.reports);
    result.deltas = compute_deltas(result.reports);
    std::sort(result.bootstrap.begin(), result.bootstrap.end(), [](const BootstrapRow& a, const BootstrapRow& b) {
        return std::tie(a.dataset, a.model, a.prompt) < std::tie(b.dataset, b.model, b.prompt);
    });
    std::stable_sort(result.curves.begin(), result.curves.end(), [](const CurveRow& a, const CurveRow& b) {
        return std::make_tuple(a.dataset, a.model, a.prompt, signal_name(a.signal)) <
               std::make_tuple(b.dataset, b.model, b.prompt, signal_name(b.signal));
    });
    std::sort(result.temperatures.begin(), result.temperatures.end(),
              [](const TemperatureRow& a, const TemperatureRow& b) {
                  return std::tie(a.dataset, a.model) < std::tie(b.dataset, b.model);
              });
    std::sort(result.runs.begin(), result.runs.end(), [](const RunSummaryRow& a, const RunSummaryRow& b) {
        return std::tie(a.dataset, a.model) < std::tie(b.dataset, b.model);
    });
    return result;
}

EvalResult evaluate(const EvalConfig& config) {
    validate_eval_config(config);
    std::vector<ValidatedRun> runs;
    for (const auto& dir : config.run_directories) {
        runs.push_back(load_run(dir));
    }
    return evaluate_runs(runs, config, config.run_directories);
}

std::string format_cell(std::optional<double> value) {
    if (!value) {
        return "NA";
    }
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.3f", *value);
    // Avoid "-0.000" for tiny negative deltas.
    if (std::string_view(buffer) == "-0.000") {
        return "0.000";
    }
    return buffer;
}

std::string format_exact(std::optional<double> value) {
    if (!value) {
        return "NA";
    }
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), *value);
    return std::string(buffer, result.ptr);
}

std::string render_csv(const Table& table) {
    std::string out;
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) {
                out.push_back(',');
            }
            out += csv_escape(cells[i]);
        }
        out.push_back('\n');
    };
    line(table.headers);
    for (const auto& row : table.rows) {
        line(row);
    }
    return out;
}

std::string render_text(const Table& table) {
    std::vector<std::size_t> widths(table.headers.size(), 0);
    for (std::size_t c = 0; c < table.headers.size(); ++c) {
        widths[c] = display_width(table.headers[c]);
        for (const auto& row : table.rows) {
            widths[c] = std::max(widths[c], display_width(row[c]));
        }
    }
    std::string out;
    for (const auto& note : table.notes) {
        out += "# " + note + "\n";
    }
    const auto line = [&](const std::vector<std::string>& cells) {
        std::string text;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) {
                text += "  ";
            }
            const std::string pad(widths[c] - display_width(cells[c]), ' ');
            text += c < table.key_columns ? cells[c] + pad : pad + cells[c];
        }
        while (!text.empty() && text.back() == ' ') {
            text.pop_back();
        }
        out += text + "\n";
    };
    line(table.headers);
    std::size_t rule = 0;
    for (std::size_t c = 0; c < widths.size(); ++c) {
        rule += widths[c] + (c > 0 ? 2 : 0);
    }
    out += std::string(rule, '-') + "\n";
    for (const auto& row : table.rows) {
        line(row);
    }
    return out;
}

Table main_table(std::span<const MetricReport> reports) {
    return pivot_by_prompt("main_table", reports,
                           {
                               {"Acc (LL-AVG)", Signal::LlAvg, get_accuracy},
                               {"AUROC (LL-AVG)", Signal::LlAvg, get_auroc},
                               {"AUROC (Self-Verify)", Signal::SelfVerify, get_auroc},
                               {"AUROC (LL-SUM)", Signal::LlSum, get_auroc},
                               {"AURC (LL-AVG)", Signal::LlAvg, get_aurc},
                               {"AURC (Self-Verify)", Signal::SelfVerify, get_aurc},
                               {"AURC (LL-SUM)", Signal::LlSum, get_aurc},
                           });
}

Table calibration_table(std::span<const MetricReport> reports) {
    return pivot_by_prompt("calibration", reports,
                           {
                               {"Brier (LL-AVG)", Signal::LlAvg, get_brier},
                               {"Brier (Self-Verify)", Signal::SelfVerify, get_brier},
                               {"Brier (LL-SUM)", Signal::LlSum, get_brier},
                               {"ECE10 (LL-AVG)", Signal::LlAvg, get_ece},
                               {"ECE10 (Self-Verify)", Signal::SelfVerify, get_ece},
                               {"ECE10 (LL-SUM)", Signal::LlSum, get_ece},
                           });
}

Table aux_baselines_table(std::span<const MetricReport> reports) {
    return pivot_by_prompt("aux_baselines", reports,
                           {
                               {"AUROC (LL-AVG)", Signal::LlAvg, get_auroc},
                               {"AUROC (SV)", Signal::SelfVerify, get_auroc},
                               {"AUROC (Margin)", Signal::Margin, get_auroc},
                               {"AUROC (EntropyConf)", Signal::EntropyConf, get_auroc},
                               {"AUROC (LL-AVG-T)", Signal::LlAvgT, get_auroc},
                               {"AURC (LL-AVG)", Signal::LlAvg, get_aurc},
                               {"AURC (SV)", Signal::SelfVerify, get_aurc},
                               {"AURC (Margin)", Signal::Margin, get_aurc},
                               {"AURC (EntropyConf)", Signal::EntropyConf, get_aurc},
                               {"AURC (LL-AVG-T)", Signal::LlAvgT, get_aurc},
                           });
}

Table deltas_table(std::span<const DeltaRow> deltas) {
    Table table;
    table.name = "deltas";
    table.headers = {"Dataset", "Model", "Prompt", "ΔAUROC (SV-LLAVG)", "ΔAURC (SV-LLAVG)", "ΔAUROC (SV-LLSUM)",
                     "ΔAURC (SV-LLSUM)"};
    table.key_columns = 3;
    for (const auto& d : deltas) {
        table.rows.push_back({d.dataset, d.model, d.prompt, format_cell(d.d_auroc_sv_llavg),
                              format_cell(d.d_aurc_sv_llavg), format_cell(d.d_auroc_sv_llsum),
                              format_cell(d.d_aurc_sv_llsum)});
    }
    return table;
}

Table bootstrap_table(std::span<const BootstrapRow> rows) {
    Table table;
    table.name = "bootstrap";
    table.headers = {"Dataset", "Model", "Prompt", "Mean ΔAUROC", "2.5% CI", "97.5% CI", "Replicates", "Kept"};
    table.key_columns = 3;
    for (const auto& row : rows) {
        if (row.result) {
            const auto& r = *row.result;
            table.rows.push_back({row.dataset, row.model, row.prompt, format_cell(r.mean_delta), format_cell(r.ci_low),
                                  format_cell(r.ci_high), std::to_string(r.requested_replicates),
                                  std::to_string(r.kept_replicates)});
        } else {
            table.rows.push_back({row.dataset, row.model, row.prompt, "NA", "NA", "NA", "NA", "NA"});
            table.notes.push_back(row.dataset + " / " + row.model + " / " + row.prompt + ": " + row.note);
        }
    }
    if (!rows.empty() && rows.front().result) {
        table.notes.insert(table.notes.begin(), "seed " + std::to_string(rows.front().result->seed) +
                                                    "; single-class replicates discarded");
    }
    return table;
}

Table operating_points_table(std::span<const MetricReport> reports, std::span<const double> coverage_targets,
                             std::span<const double> risk_targets) {
    std::vector<double> coverages(coverage_targets.begin(), coverage_targets.end());
    std::vector<double> risks(risk_targets.begin(), risk_targets.end());
    if (coverages.empty() && risks.empty() && !reports.empty()) {
        for (const auto& p : reports.front().err_at_coverage) {
            coverages.push_back(p.target);
        }
        for (const auto& p : reports.front().cov_at_error) {
            risks.push_back(p.target);
        }
    }
    Table table;
    table.name = "operating_points";
    table.headers = {"Dataset", "Model", "Prompt", "Signal"};
    table.key_columns = 4;
    for (const double t : coverages) {
        table.headers.push_back(err_header(t));
    }
    for (const double t : risks) {
        table.headers.push_back(cov_header(t));
    }
    for (const auto& report : reports) {
        std::vector<std::string> row{report.dataset, report.model, report.prompt, std::string(signal_name(report.signal))};
        for (const double t : coverages) {
            row.push_back(format_cell(report.err_at(t)));
        }
        for (const double t : risks) {
            row.push_back(format_cell(report.cov_at(t)));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table prompt_ablation_table(std::span<const MetricReport> reports) {
    std::set<std::string> variants;
    std::map<std::pair<std::string, std::string>, std::map<std::string, const MetricReport*>> grouped;
    for (const auto& report : reports) {
        if (report.signal != Signal::SelfVerify) {
            continue;
        }
        variants.insert(report.prompt);
        grouped[{report.dataset, report.model}][report.prompt] = &report;
    }
    Table table;
    table.name = "prompt_ablation";
    table.headers = {"Dataset", "Model"};
    table.key_columns = 2;
    for (const auto& v : variants) {
        table.headers.push_back("AURC (" + v + ")");
    }
    for (const auto& v : variants) {
        table.headers.push_back("AUROC (" + v + ")");
    }
    const bool pairwise = variants.size() == 2;
    if (pairwise) {
        table.headers.push_back("|ΔAUROC|");
        table.headers.push_back("|ΔAURC|");
    } else {
        table.notes.push_back("|ΔAUROC| and |ΔAURC| need exactly two prompt variants");
    }
    for (const auto& [key, by_variant] : grouped) {
        std::vector<std::string> row{key.first, key.second};
        std::vector<std::optional<double>> aurcs;
        std::vector<std::optional<double>> aurocs;
        for (const auto& v : variants) {
            const auto it = by_variant.find(v);
            aurcs.push_back(it == by_variant.end() ? std::nullopt : std::optional<double>(it->second->aurc));
            aurocs.push_back(it == by_variant.end() ? std::nullopt : it->second->auroc);
        }
        for (const auto& x : aurcs) {
            row.push_back(format_cell(x));
        }
        for (const auto& x : aurocs) {
            row.push_back(format_cell(x));
        }
        if (pairwise) {
            const auto abs_diff = [](std::optional<double> a, std::optional<double> b) -> std::optional<double> {
                if (!a || !b) {
                    return std::nullopt;
                }
                return std::fabs(*a - *b);
            };
            row.push_back(format_cell(abs_diff(aurocs[0], aurocs[1])));
            row.push_back(format_cell(abs_diff(aurcs[0], aurcs[1])));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table metrics_table(std::span<const MetricReport> reports) {
    Table table;
    table.name = "metrics";
    table.headers = {"dataset", "model", "prompt", "signal", "n", "accuracy", "auroc", "aurc", "brier", "ece10"};
    table.key_columns = 4;
    if (!reports.empty()) {
        for (const auto& p : reports.front().err_at_coverage) {
            table.headers.push_back(err_header(p.target));
        }
        for (const auto& p : reports.front().cov_at_error) {
            table.headers.push_back(cov_header(p.target));
        }
    }
    for (const auto& r : reports) {
        std::vector<std::string> row{r.dataset,           r.model,
                                     r.prompt,            std::string(signal_name(r.signal)),
                                     std::to_string(r.n), format_exact(r.accuracy),
                                     format_exact(r.auroc), format_exact(r.aurc),
                                     format_exact(r.brier), format_exact(r.ece10)};
        for (const auto& p : r.err_at_coverage) {
            row.push_back(format_exact(p.value));
        }
        for (const auto& p : r.cov_at_error) {
            row.push_back(format_exact(p.value));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table temperature_table(std::span<const TemperatureRow> rows) {
    Table table;
    table.name = "temperature";
    table.headers = {"Dataset", "Model", "Temperature", "Calibration NLL", "Calibration n", "Evaluation n"};
    table.key_columns = 2;
    for (const auto& row : rows) {
        table.rows.push_back({row.dataset, row.model, format_exact(row.fit.temperature),
                              format_exact(row.fit.calibration_nll), std::to_string(row.calibration_size),
                              std::to_string(row.evaluation_size)});
    }
    return table;
}

Table validation_table(std::span<const RunSummaryRow> rows) {
    Table table;
    table.name = "validation";
    table.headers = {"Dataset",        "Model",     "Directory",          "Examples",
                     "Unknown fields", "Discarded", "Verify mismatches"};
    table.key_columns = 3;
    for (const auto& row : rows) {
        table.rows.push_back({row.dataset, row.model, row.directory, std::to_string(row.examples),
                              std::to_string(row.summary.unknown_field_warnings),
                              std::to_string(row.summary.discarded_examples),
                              std::to_string(row.summary.verify_prediction_mismatches)});
    }
    return table;
}

void emit_table(const Table& table, const std::filesystem::path& directory) {
    ensure_directory(directory);
    write_text_file(directory / (table.name + ".csv"), render_csv(table));
    write_text_file(directory / (table.name + ".txt"), render_text(table));
}

void emit_main_table(std::span<const MetricReport> reports, const std::filesystem::path& directory) {
    emit_table(main_table(reports), directory);
}

void emit_operating_points(std::span<const MetricReport> reports, const std::filesystem::path& directory) {
    emit_table(operating_points_table(reports), directory);
}

void emit_calibration_table(std::span<const MetricReport> reports, const std::filesystem::path& directory) {
    emit_table(calibration_table(reports), directory);
}

std::string curve_csv(const RiskCoverageCurve& curve) {
    std::string out = "coverage,risk\n";
    for (const auto& point : curve.points) {
        out += format_exact(point.coverage) + "," + format_exact(point.risk) + "\n";
    }
    return out;
}

std::string curve_file_name(const CurveRow& row) {
    const auto clean = [](std::string text) {
        for (char& c : text) {
            const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
                            c == '_' || c == '-';
            if (!ok) {
                c = '_';
            }
        }
        return text;
    };
    return clean(row.dataset) + "__" + clean(row.model) + "__" + clean(row.prompt) + "__" +
           clean(std::string(signal_name(row.signal))) + ".csv";
}

void emit_curves(std::span<const CurveRow> curves, const std::filesystem::path& directory) {
    ensure_directory(directory);
    std::set<std::string> seen;
    for (const auto& row : curves) {
        const auto name = curve_file_name(row);
        if (!seen.insert(name).second) {
            throw IntegrityError("two curves map to the same file name: " + name);
        }
        write_text_file(directory / name, curve_csv(row.curve));
    }
}

std::vector<CurveRow> run_curves(const ValidatedRun& run, std::span<const Signal> signals,
                                 std::span<const std::string> variants) {
    EvalConfig config;
    config.signals.assign(signals.begin(), signals.end());
    config.prompt_variants.assign(variants.begin(), variants.end());
    config.bootstrap.enabled = false;
    config.run_directories = {"."};
    config.threads = 1;
    auto result = evaluate_runs(std::span<const ValidatedRun>(&run, 1), config);
    return std::move(result.curves);
}

void write_outputs(const EvalResult& result, const EvalConfig& config, const std::filesystem::path& directory) {
    ensure_directory(directory);
    write_text_file(directory / "config.json", serialize_eval_config(config));

    const auto metrics = metrics_table(result.reports);
    write_text_file(directory / "metrics.csv", render_csv(metrics));
    emit_table(main_table(result.reports), directory);
    emit_table(operating_points_table(result.reports, config.coverage_targets, config.risk_targets), directory);
    emit_table(calibration_table(result.reports), directory);
    emit_table(validation_table(result.runs), directory);

    if (wants(config, Signal::SelfVerify)) {
        emit_table(deltas_table(result.deltas), directory);
        emit_table(prompt_ablation_table(result.reports), directory);
        if (config.bootstrap.enabled) {
            emit_table(bootstrap_table(result.bootstrap), directory);
        }
    }
    if (wants(config, Signal::Margin) || wants(config, Signal::EntropyConf) || wants(config, Signal::LlAvgT)) {
        emit_table(aux_baselines_table(result.reports), directory);
    }
    if (!result.temperatures.empty()) {
        emit_table(temperature_table(result.temperatures), directory);
    }
    emit_curves(result.curves, directory / "curves");
}

}  // namespace selpred
