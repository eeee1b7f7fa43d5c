#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selpred/calibration.hpp"
#include "selpred/metrics.hpp"
#include "selpred/records.hpp"
#include "selpred/signals.hpp"

namespace selpred {

struct BootstrapSettings {
    std::size_t replicates = 2000;
    std::int64_t seed = 42;
    bool enabled = true;
};

struct TemperatureSettings {
    double fraction = 0.2;
    std::size_t minimum = 50;
    std::int64_t seed = 42;
};

struct EvalConfig {
    std::vector<std::filesystem::path> run_directories;
    std::vector<Signal> signals{Signal::LlAvg,  Signal::LlSum,       Signal::SelfVerify,
                                Signal::Margin, Signal::EntropyConf, Signal::LlAvgT};
    /// Verification prompt variants to evaluate; empty means every variant in the manifest.
    std::vector<std::string> prompt_variants;
    std::vector<double> coverage_targets{0.8, 0.5};
    std::vector<double> risk_targets{0.2, 0.1};
    BootstrapSettings bootstrap;
    TemperatureSettings temperature;
    std::filesystem::path output_directory;
    /// Concurrent runs; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// Parses a JSON config. Relative run directories are resolved against base_directory.
/// Unknown keys and out-of-range values raise ConfigError.
EvalConfig parse_eval_config(std::string_view text, const std::filesystem::path& base_directory = {});
EvalConfig load_eval_config(const std::filesystem::path& path);

/// Snapshot written next to the outputs. output_directory is left out so the
/// same evaluation written to two places produces identical files.
std::string serialize_eval_config(const EvalConfig& config);

/// Throws ConfigError when the config cannot be evaluated.
void validate_eval_config(const EvalConfig& config);

/// Self-Verify minus LL-AVG and minus LL-SUM for one (dataset, model, prompt).
struct DeltaRow {
    std::string dataset;
    std::string model;
    std::string prompt;
    std::optional<double> d_auroc_sv_llavg;
    std::optional<double> d_aurc_sv_llavg;
    std::optional<double> d_auroc_sv_llsum;
    std::optional<double> d_aurc_sv_llsum;
};

struct BootstrapRow {
    std::string dataset;
    std::string model;
    std::string prompt;
    /// Empty when the bootstrap was undefined; note says why.
    std::optional<BootstrapResult> result;
    std::string note;
};

struct CurveRow {
    std::string dataset;
    std::string model;
    std::string prompt;
    Signal signal = Signal::LlAvg;
    RiskCoverageCurve curve;
};

struct TemperatureRow {
    std::string dataset;
    std::string model;
    TemperatureFit fit;
    std::size_t calibration_size = 0;
    std::size_t evaluation_size = 0;
};

struct RunSummaryRow {
    std::string dataset;
    std::string model;
    std::string directory;
    std::size_t examples = 0;
    ValidationSummary summary;
};

struct EvalResult {
    std::vector<MetricReport> reports;
    std::vector<DeltaRow> deltas;
    std::vector<BootstrapRow> bootstrap;
    std::vector<CurveRow> curves;
    std::vector<TemperatureRow> temperatures;
    std::vector<RunSummaryRow> runs;
};

/// Loads every run directory and evaluates it. Load failures propagate with the failing path.
EvalResult evaluate(const EvalConfig& config);

/// Evaluates runs already in memory. `directories` may be empty or parallel to `runs`.
EvalResult evaluate_runs(std::span<const ValidatedRun> runs, const EvalConfig& config,
                         std::span<const std::filesystem::path> directories = {});

/// Deltas from Self-Verify, LL-AVG and LL-SUM reports sharing (dataset, model, prompt).
std::vector<DeltaRow> compute_deltas(std::span<const MetricReport> reports);

/// Orders reports by (dataset, model, prompt, signal name).
void sort_reports(std::vector<MetricReport>& reports);

/// A rendered table. Cells are already formatted.
struct Table {
    std::string name;
    std::vector<std::string> headers;
    /// Leading key columns (left-aligned in text output).
    std::size_t key_columns = 0;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;
};

/// Three-decimal rendering, "NA" for missing values.
std::string format_cell(std::optional<double> value);

/// Shortest round-trip decimal text, "NA" for missing values.
std::string format_exact(std::optional<double> value);

std::string render_csv(const Table& table);
std::string render_text(const Table& table);

Table main_table(std::span<const MetricReport> reports);
Table deltas_table(std::span<const DeltaRow> deltas);
Table bootstrap_table(std::span<const BootstrapRow> rows);
Table operating_points_table(std::span<const MetricReport> reports, std::span<const double> coverage_targets = {},
                             std::span<const double> risk_targets = {});
Table calibration_table(std::span<const MetricReport> reports);
Table aux_baselines_table(std::span<const MetricReport> reports);
Table prompt_ablation_table(std::span<const MetricReport> reports);
/// Every report with full-precision numbers, one row per (dataset, model, prompt, signal).
Table metrics_table(std::span<const MetricReport> reports);
Table temperature_table(std::span<const TemperatureRow> rows);
Table validation_table(std::span<const RunSummaryRow> rows);

/// Writes <name>.csv and <name>.txt into directory.
void emit_table(const Table& table, const std::filesystem::path& directory);

void emit_main_table(std::span<const MetricReport> reports, const std::filesystem::path& directory);
void emit_operating_points(std::span<const MetricReport> reports, const std::filesystem::path& directory);
void emit_calibration_table(std::span<const MetricReport> reports, const std::filesystem::path& directory);

/// "coverage,risk" header followed by one row per point, anchor included.
std::string curve_csv(const RiskCoverageCurve& curve);

/// File name for a curve: <dataset>__<model>__<prompt>__<signal>.csv with
/// characters outside [A-Za-z0-9._-] replaced by '_'.
std::string curve_file_name(const CurveRow& row);

/// Writes one curve file per row into directory.
void emit_curves(std::span<const CurveRow> curves, const std::filesystem::path& directory);

/// Curves for every (variant, signal) of one run, for the `curves` subcommand.
std::vector<CurveRow> run_curves(const ValidatedRun& run, std::span<const Signal> signals,
                                 std::span<const std::string> variants = {});

/// Writes every table, the curves directory and config.json into directory.
void write_outputs(const EvalResult& result, const EvalConfig& config, const std::filesystem::path& directory);

}  // namespace selpred
