#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selpred {

/// Version tag written into every manifest and record line.
inline constexpr std::string_view kSchemaVersion = "1";

inline constexpr std::string_view kManifestFileName = "manifest.json";
inline constexpr std::string_view kRecordsFileName = "records.jsonl";

/// Log-likelihood of one answer option: token count and summed token log-probs (nats).
struct OptionScore {
    std::int64_t token_count = 1;
    double sum_logprob = 0.0;

    double average() const { return sum_logprob / static_cast<double>(token_count); }

    friend bool operator==(const OptionScore&, const OptionScore&) = default;
};

/// Next-token logits restricted to the True and False surface-form token sets.
struct VerifyLogits {
    std::vector<double> true_logits;
    std::vector<double> false_logits;
    bool fallback_used = false;
    /// Option index the adapter verified, when it recorded one.
    std::optional<std::int64_t> predicted_index;

    friend bool operator==(const VerifyLogits&, const VerifyLogits&) = default;
};

struct ExampleRecord {
    std::string schema_version{kSchemaVersion};
    std::string example_id;
    std::uint64_t order_index = 0;
    std::int64_t gold_index = 0;
    std::vector<OptionScore> options;
    std::map<std::string, VerifyLogits> verify;

    std::size_t option_count() const { return options.size(); }

    friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

struct RunManifest {
    std::string schema_version{kSchemaVersion};
    std::string dataset_name;
    std::string dataset_config;
    std::string dataset_split;
    std::string dataset_revision;
    std::string model_id;
    std::int64_t seed = 42;
    std::vector<std::string> prompt_variants;
    std::vector<std::int64_t> true_token_ids;
    std::vector<std::int64_t> false_token_ids;
    std::uint64_t example_count = 0;

    // Optional fields.
    std::optional<std::string> dataset_label;
    std::optional<std::string> model_label;
    std::uint64_t discarded_count = 0;

    /// Display name for tables: dataset_label when present, else dataset_name.
    std::string dataset_display() const { return dataset_label.value_or(dataset_name); }
    std::string model_display() const { return model_label.value_or(model_id); }

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

/// Side-channel counters collected while parsing and validating a run.
struct ValidationSummary {
    std::size_t unknown_field_warnings = 0;
    /// Examples the adapter dropped for an unmappable gold answer (from the manifest).
    std::uint64_t discarded_examples = 0;
    /// Verify entries whose recorded predicted_index differs from the LL-AVG argmax.
    std::size_t verify_prediction_mismatches = 0;

    friend bool operator==(const ValidationSummary&, const ValidationSummary&) = default;
};

/// A loaded run: records sorted by order_index, which runs 0..n-1 without gaps.
struct ValidatedRun {
    RunManifest manifest;
    std::vector<ExampleRecord> records;
    ValidationSummary summary;

    std::size_t size() const { return records.size(); }
};

/// Parses one records.jsonl line. Unknown fields are skipped and counted into
/// *unknown_fields when given. Throws ParseError (bad syntax, with line_number)
/// or ValidationError (missing field, wrong type, non-finite number,
/// gold_index out of range, K < 2).
ExampleRecord parse_record_line(std::string_view line, std::size_t line_number = 1,
                                std::size_t* unknown_fields = nullptr);

/// Canonical single-line serialization (no trailing newline). Numbers use the
/// shortest decimal form that round-trips to the same double.
std::string serialize_record_line(const ExampleRecord& record);

RunManifest parse_manifest(std::string_view text, std::size_t* unknown_fields = nullptr);
std::string serialize_manifest(const RunManifest& manifest);

/// Checks record-level invariants; throws ValidationError naming example_id.
void validate_record(const ExampleRecord& record);

/// Index of the highest averaged option score, ties to the lowest index.
std::size_t llavg_argmax(const ExampleRecord& record);

/// Loads <dir>/manifest.json and <dir>/records.jsonl.
///
/// Throws IoError when either file is missing, ParseError / ValidationError for
/// bad content, and IntegrityError when the line count disagrees with
/// example_count or order_index values are duplicated or leave gaps.
ValidatedRun load_run(const std::filesystem::path& directory);

/// Sorts by order_index and validates a run built in memory (same checks as load_run).
ValidatedRun validate_run(RunManifest manifest, std::vector<ExampleRecord> records);

/// Writes manifest.json and records.jsonl into directory (created if needed).
/// Records are written in the order given.
void write_run(const std::filesystem::path& directory, const RunManifest& manifest,
               std::span<const ExampleRecord> records);

}  // namespace selpred
