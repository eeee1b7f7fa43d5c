#include "selpred/records.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "selpred/errors.hpp"

namespace selpred {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Python's json module writes NaN / Infinity / -Infinity as bare tokens, which
// strict JSON rejects. Quote them outside string literals so the value reaches
// the finiteness check and is reported as a validation error.
std::string quote_nonfinite_literals(std::string_view text) {
    static constexpr std::string_view kTokens[] = {"-Infinity", "Infinity", "NaN"};
    std::string out;
    out.reserve(text.size() + 8);
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_string) {
            out.push_back(ch);
            if (ch == '\\' && i + 1 < text.size()) {
                out.push_back(text[++i]);
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
            out.push_back(ch);
            continue;
        }
        bool replaced = false;
        for (const auto token : kTokens) {
            if (text.substr(i, token.size()) == token) {
                out.push_back('"');
                out.append(token);
                out.push_back('"');
                i += token.size() - 1;
                replaced = true;
                break;
            }
        }
        if (!replaced) {
            out.push_back(ch);
        }
    }
    return out;
}

json parse_json(std::string_view text, std::size_t line_number) {
    try {
        return json::parse(quote_nonfinite_literals(text));
    } catch (const json::parse_error& e) {
        throw ParseError(line_number, e.what());
    }
}

class FieldReader {
public:
    FieldReader(const json& object, std::string context) : object_(object), context_(std::move(context)) {
        if (!object_.is_object()) {
            throw ValidationError(context_ + ": expected an object");
        }
    }

    const json& require(const char* key) const {
        const auto it = object_.find(key);
        if (it == object_.end()) {
            throw ValidationError(context_ + ": missing required field '" + key + "'");
        }
        return *it;
    }

    bool has(const char* key) const { return object_.contains(key); }

    std::string string(const char* key) const {
        const json& value = require(key);
        if (!value.is_string()) {
            throw ValidationError(context_ + ": field '" + key + "' must be a string");
        }
        return value.get<std::string>();
    }

    std::int64_t integer(const char* key) const { return as_integer(require(key), key); }

    std::uint64_t nonnegative(const char* key) const {
        const std::int64_t value = integer(key);
        if (value < 0) {
            throw ValidationError(context_ + ": field '" + key + "' must be nonnegative");
        }
        return static_cast<std::uint64_t>(value);
    }

    bool boolean(const char* key) const {
        const json& value = require(key);
        if (!value.is_boolean()) {
            throw ValidationError(context_ + ": field '" + key + "' must be a boolean");
        }
        return value.get<bool>();
    }

    double real(const json& value, const std::string& what) const {
        if (value.is_number()) {
            return value.get<double>();
        }
        if (value.is_string()) {
            const auto text = value.get<std::string>();
            if (text == "NaN" || text == "nan" || text == "Infinity" || text == "-Infinity" ||
                text == "inf" || text == "-inf") {
                throw ValidationError(context_ + ": " + what + " is not finite (" + text + ")");
            }
        }
        throw ValidationError(context_ + ": " + what + " must be a number");
    }

    double finite_real(const json& value, const std::string& what) const {
        const double x = real(value, what);
        if (!std::isfinite(x)) {
            throw ValidationError(context_ + ": " + what + " is not finite");
        }
        return x;
    }

    std::vector<double> finite_reals(const char* key) const {
        const json& value = require(key);
        if (!value.is_array()) {
            throw ValidationError(context_ + ": field '" + key + "' must be an array");
        }
        std::vector<double> out;
        out.reserve(value.size());
        for (std::size_t i = 0; i < value.size(); ++i) {
            out.push_back(finite_real(value[i], std::string(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    std::vector<std::int64_t> integers(const char* key) const {
        const json& value = require(key);
        if (!value.is_array()) {
            throw ValidationError(context_ + ": field '" + key + "' must be an array");
        }
        std::vector<std::int64_t> out;
        for (const auto& item : value) {
            out.push_back(as_integer(item, key));
        }
        return out;
    }

    std::vector<std::string> strings(const char* key) const {
        const json& value = require(key);
        if (!value.is_array()) {
            throw ValidationError(context_ + ": field '" + key + "' must be an array");
        }
        std::vector<std::string> out;
        for (const auto& item : value) {
            if (!item.is_string()) {
                throw ValidationError(context_ + ": field '" + key + "' must hold strings");
            }
            out.push_back(item.get<std::string>());
        }
        return out;
    }

    std::size_t count_unknown(std::initializer_list<std::string_view> known) const {
        std::size_t unknown = 0;
        for (const auto& item : object_.items()) {
            if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
                ++unknown;
            }
        }
        return unknown;
    }

    const std::string& context() const { return context_; }

private:
    std::int64_t as_integer(const json& value, const char* key) const {
        if (value.is_number_integer()) {
            return value.get<std::int64_t>();
        }
        if (value.is_number_float()) {
            const double x = value.get<double>();
            if (std::isfinite(x) && std::floor(x) == x && std::fabs(x) < 9.0e15) {
                return static_cast<std::int64_t>(x);
            }
        }
        throw ValidationError(context_ + ": field '" + key + "' must be an integer");
    }

    const json& object_;
    std::string context_;
};

void check_schema_version(const std::string& version, const std::string& context) {
    if (version != kSchemaVersion) {
        throw ValidationError(context + ": unsupported schema_version '" + version + "' (expected '" +
                              std::string(kSchemaVersion) + "')");
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate_record(const ExampleRecord& record) {
    const std::string who = "example '" + record.example_id + "'";
    if (record.options.size() < 2) {
        throw ValidationError(who + ": needs at least 2 options, got " + std::to_string(record.options.size()));
    }
    if (record.gold_index < 0 || static_cast<std::size_t>(record.gold_index) >= record.options.size()) {
        throw ValidationError(who + ": gold_index " + std::to_string(record.gold_index) + " out of range [0, " +
                              std::to_string(record.options.size()) + ")");
    }
    for (std::size_t i = 0; i < record.options.size(); ++i) {
        const auto& option = record.options[i];
        if (option.token_count < 1) {
            throw ValidationError(who + ": options[" + std::to_string(i) + "].token_count must be >= 1");
        }
        if (!std::isfinite(option.sum_logprob)) {
            throw ValidationError(who + ": options[" + std::to_string(i) + "].sum_logprob is not finite");
        }
    }
    for (const auto& [variant, logits] : record.verify) {
        if (logits.true_logits.empty() || logits.false_logits.empty()) {
            throw ValidationError(who + ": verify '" + variant + "' needs non-empty true and false logits");
        }
        const auto finite = [](double x) { return std::isfinite(x); };
        if (!std::all_of(logits.true_logits.begin(), logits.true_logits.end(), finite) ||
            !std::all_of(logits.false_logits.begin(), logits.false_logits.end(), finite)) {
            throw ValidationError(who + ": verify '" + variant + "' holds a non-finite logit");
        }
    }
}

ExampleRecord parse_record_line(std::string_view line, std::size_t line_number, std::size_t* unknown_fields) {
    const json object = parse_json(line, line_number);
    if (!object.is_object()) {
        throw ParseError(line_number, "record line is not a JSON object");
    }
    const std::string context = "records line " + std::to_string(line_number);
    FieldReader reader(object, context);
    std::size_t unknown = reader.count_unknown(
        {"schema_version", "example_id", "order_index", "gold_index", "options", "verify"});

    ExampleRecord record;
    record.schema_version = reader.string("schema_version");
    check_schema_version(record.schema_version, context);
    record.example_id = reader.string("example_id");
    record.order_index = reader.nonnegative("order_index");
    record.gold_index = reader.integer("gold_index");

    const json& options = reader.require("options");
    if (!options.is_array()) {
        throw ValidationError(context + ": field 'options' must be an array");
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
        FieldReader option(options[i], context + " options[" + std::to_string(i) + "]");
        unknown += option.count_unknown({"token_count", "sum_logprob"});
        OptionScore score;
        score.token_count = option.integer("token_count");
        score.sum_logprob = option.real(option.require("sum_logprob"), "sum_logprob");
        record.options.push_back(score);
    }

    const json& verify = reader.require("verify");
    if (!verify.is_object()) {
        throw ValidationError(context + ": field 'verify' must be an object");
    }
    for (const auto& item : verify.items()) {
        FieldReader entry(item.value(), context + " verify['" + item.key() + "']");
        unknown += entry.count_unknown({"true_logits", "false_logits", "fallback_used", "predicted_index"});
        VerifyLogits logits;
        logits.true_logits = entry.finite_reals("true_logits");
        logits.false_logits = entry.finite_reals("false_logits");
        logits.fallback_used = entry.boolean("fallback_used");
        if (entry.has("predicted_index")) {
            logits.predicted_index = entry.integer("predicted_index");
        }
        record.verify.emplace(item.key(), std::move(logits));
    }

    validate_record(record);
    if (unknown_fields != nullptr) {
        *unknown_fields += unknown;
    }
    return record;
}

std::string serialize_record_line(const ExampleRecord& record) {
    ordered_json out;
    out["schema_version"] = record.schema_version;
    out["example_id"] = record.example_id;
    out["order_index"] = record.order_index;
    out["gold_index"] = record.gold_index;
    ordered_json options = ordered_json::array();
    for (const auto& option : record.options) {
        ordered_json entry;
        entry["token_count"] = option.token_count;
        entry["sum_logprob"] = option.sum_logprob;
        options.push_back(std::move(entry));
    }
    out["options"] = std::move(options);
    ordered_json verify = ordered_json::object();
    for (const auto& [variant, logits] : record.verify) {
        ordered_json entry;
        entry["true_logits"] = logits.true_logits;
        entry["false_logits"] = logits.false_logits;
        entry["fallback_used"] = logits.fallback_used;
        if (logits.predicted_index) {
            entry["predicted_index"] = *logits.predicted_index;
        }
        verify[variant] = std::move(entry);
    }
    out["verify"] = std::move(verify);
    return out.dump();
}

RunManifest parse_manifest(std::string_view text, std::size_t* unknown_fields) {
    const json object = parse_json(text, 1);
    FieldReader reader(object, "manifest");
    const std::size_t unknown = reader.count_unknown(
        {"schema_version", "dataset_name", "dataset_config", "dataset_split", "dataset_revision", "model_id", "seed",
         "prompt_variants", "true_token_ids", "false_token_ids", "example_count", "dataset_label", "model_label",
         "discarded_count"});

    RunManifest manifest;
    manifest.schema_version = reader.string("schema_version");
    check_schema_version(manifest.schema_version, "manifest");
    manifest.dataset_name = reader.string("dataset_name");
    manifest.dataset_config = reader.string("dataset_config");
    manifest.dataset_split = reader.string("dataset_split");
    manifest.dataset_revision = reader.string("dataset_revision");
    manifest.model_id = reader.string("model_id");
    manifest.seed = reader.integer("seed");
    manifest.prompt_variants = reader.strings("prompt_variants");
    manifest.true_token_ids = reader.integers("true_token_ids");
    manifest.false_token_ids = reader.integers("false_token_ids");
    manifest.example_count = reader.nonnegative("example_count");
    if (reader.has("dataset_label")) {
        manifest.dataset_label = reader.string("dataset_label");
    }
    if (reader.has("model_label")) {
        manifest.model_label = reader.string("model_label");
    }
    if (reader.has("discarded_count")) {
        manifest.discarded_count = reader.nonnegative("discarded_count");
    }
    if (manifest.prompt_variants.empty()) {
        throw ValidationError("manifest: prompt_variants must be non-empty");
    }
    if (unknown_fields != nullptr) {
        *unknown_fields += unknown;
    }
    return manifest;
}

std::string serialize_manifest(const RunManifest& manifest) {
    ordered_json out;
    out["schema_version"] = manifest.schema_version;
    out["dataset_name"] = manifest.dataset_name;
    out["dataset_config"] = manifest.dataset_config;
    out["dataset_split"] = manifest.dataset_split;
    out["dataset_revision"] = manifest.dataset_revision;
    out["model_id"] = manifest.model_id;
    out["seed"] = manifest.seed;
    out["prompt_variants"] = manifest.prompt_variants;
    out["true_token_ids"] = manifest.true_token_ids;
    out["false_token_ids"] = manifest.false_token_ids;
    out["example_count"] = manifest.example_count;
    if (manifest.dataset_label) {
        out["dataset_label"] = *manifest.dataset_label;
    }
    if (manifest.model_label) {
        out["model_label"] = *manifest.model_label;
    }
    if (manifest.discarded_count != 0) {
        out["discarded_count"] = manifest.discarded_count;
    }
    return out.dump(2) + "\n";
}

std::size_t llavg_argmax(const ExampleRecord& record) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < record.options.size(); ++i) {
        if (record.options[i].average() > record.options[best].average()) {
            best = i;
        }
    }
    return best;
}

ValidatedRun validate_run(RunManifest manifest, std::vector<ExampleRecord> records) {
    check_schema_version(manifest.schema_version, "manifest");
    if (manifest.prompt_variants.empty()) {
        throw ValidationError("manifest: prompt_variants must be non-empty");
    }
    if (manifest.example_count != records.size()) {
        throw IntegrityError("manifest example_count is " + std::to_string(manifest.example_count) +
                             " but the records file holds " + std::to_string(records.size()) + " records");
    }
    for (const auto& record : records) {
        validate_record(record);
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const ExampleRecord& a, const ExampleRecord& b) { return a.order_index < b.order_index; });
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::uint64_t index = records[i].order_index;
        if (i > 0 && index == records[i - 1].order_index) {
            throw IntegrityError("duplicate order_index " + std::to_string(index) + " (examples '" +
                                 records[i - 1].example_id + "' and '" + records[i].example_id + "')");
        }
        if (index != i) {
            throw IntegrityError("order_index values must run 0.." + std::to_string(records.size() - 1) +
                                 " without gaps; found " + std::to_string(index) + " at position " +
                                 std::to_string(i));
        }
    }

    ValidatedRun run;
    run.summary.discarded_examples = manifest.discarded_count;
    for (const auto& record : records) {
        const auto predicted = static_cast<std::int64_t>(llavg_argmax(record));
        for (const auto& [variant, logits] : record.verify) {
            if (logits.predicted_index && *logits.predicted_index != predicted) {
                ++run.summary.verify_prediction_mismatches;
            }
        }
    }
    run.manifest = std::move(manifest);
    run.records = std::move(records);
    return run;
}

ValidatedRun load_run(const std::filesystem::path& directory) {
    const auto manifest_path = directory / kManifestFileName;
    const auto records_path = directory / kRecordsFileName;
    if (!std::filesystem::is_directory(directory)) {
        throw IoError("run directory not found: " + directory.string());
    }
    if (!std::filesystem::is_regular_file(manifest_path)) {
        throw IoError("missing manifest: " + manifest_path.string());
    }
    if (!std::filesystem::is_regular_file(records_path)) {
        throw IoError("missing records file: " + records_path.string());
    }

    std::size_t unknown = 0;
    RunManifest manifest = parse_manifest(read_file(manifest_path), &unknown);

    std::ifstream in(records_path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + records_path.string());
    }
    std::vector<ExampleRecord> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (is_blank(line)) {
            continue;
        }
        records.push_back(parse_record_line(line, line_number, &unknown));
    }

    ValidatedRun run = validate_run(std::move(manifest), std::move(records));
    run.summary.unknown_field_warnings = unknown;
    return run;
}

void write_run(const std::filesystem::path& directory, const RunManifest& manifest,
               std::span<const ExampleRecord> records) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) {
        throw IoError("cannot create " + directory.string() + ": " + ec.message());
    }
    {
        std::ofstream out(directory / kRecordsFileName, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + (directory / kRecordsFileName).string());
        }
        for (const auto& record : records) {
            out << serialize_record_line(record) << '\n';
        }
    }
    // Manifest last: a directory without a complete manifest is never read.
    std::ofstream out(directory / kManifestFileName, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (directory / kManifestFileName).string());
    }
    out << serialize_manifest(manifest);
}

}  // namespace selpred
