#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "selpred/errors.hpp"
#include "selpred/records.hpp"
#include "selpred/report.hpp"
#include "selpred/synth.hpp"

namespace selpred::cli {
namespace {

namespace fs = std::filesystem;

std::optional<fs::path> env_output_root() {
    const char* value = std::getenv("SELPRED_OUT");
    if (value == nullptr || *value == '\0') {
        return std::nullopt;
    }
    return fs::path(value);
}

// --out wins, then the fallback, then $SELPRED_OUT/<leaf>.
fs::path resolve_output(const std::string& flag, const fs::path& fallback, const std::string& leaf) {
    if (!flag.empty()) {
        return flag;
    }
    if (!fallback.empty()) {
        return fallback;
    }
    if (auto root = env_output_root()) {
        return *root / leaf;
    }
    throw ConfigError("no output directory: pass --out or set SELPRED_OUT");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) {
            items.push_back(item);
        }
    }
    return items;
}

void report_warnings(const EvalResult& result, std::ostream& err) {
    for (const auto& run : result.runs) {
        const auto& s = run.summary;
        if (s.unknown_field_warnings > 0) {
            err << "warning: " << run.directory << ": " << s.unknown_field_warnings << " unknown field(s) ignored\n";
        }
        if (s.discarded_examples > 0) {
            err << "note: " << run.directory << ": " << s.discarded_examples
                << " example(s) discarded upstream (unmappable gold answer)\n";
        }
        if (s.verify_prediction_mismatches > 0) {
            err << "warning: " << run.directory << ": " << s.verify_prediction_mismatches
                << " verify entr(ies) judged a different answer than the LL-AVG prediction\n";
        }
    }
    for (const auto& row : result.bootstrap) {
        if (!row.result) {
            err << "note: bootstrap " << row.dataset << " / " << row.model << " / " << row.prompt << ": " << row.note
                << "\n";
        }
    }
}

struct EvalArgs {
    std::string config_path;
    std::vector<std::string> run_dirs;
    std::string out;
    std::string signals;
    std::string variants;
    bool no_bootstrap = false;
    unsigned threads = 0;
    bool threads_set = false;
};

int do_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    EvalConfig config;
    if (!args.config_path.empty()) {
        config = load_eval_config(args.config_path);
    }
    if (!args.run_dirs.empty()) {
        config.run_directories.assign(args.run_dirs.begin(), args.run_dirs.end());
    }
    if (!args.signals.empty()) {
        config.signals.clear();
        for (const auto& name : split_list(args.signals)) {
            config.signals.push_back(parse_signal(name));
        }
    }
    if (!args.variants.empty()) {
        config.prompt_variants = split_list(args.variants);
    }
    if (args.no_bootstrap) {
        config.bootstrap.enabled = false;
    }
    if (args.threads_set) {
        config.threads = args.threads;
    }
    const fs::path directory = resolve_output(args.out, config.output_directory, "eval");
    validate_eval_config(config);

    const EvalResult result = evaluate(config);
    report_warnings(result, err);
    write_outputs(result, config, directory);
    out << render_text(main_table(result.reports));
    out << "wrote " << directory.generic_string() << "\n";
    return kExitOk;
}

int do_synth(SynthSpec spec, const std::string& out_flag, std::ostream& out) {
    try {
        validate_synth_spec(spec);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    const ValidatedRun run = generate_run(spec);
    const fs::path directory = resolve_output(out_flag, {}, run.manifest.model_display());
    write_run(directory, run.manifest, run.records);
    out << "wrote " << run.size() << " records to " << directory.generic_string() << "\n";
    return kExitOk;
}

int do_curves(const std::string& run_dir, const std::string& out_flag, const std::string& signals_flag,
              std::ostream& out) {
    std::vector<Signal> signals(all_signals().begin(), all_signals().end());
    if (!signals_flag.empty()) {
        signals.clear();
        for (const auto& name : split_list(signals_flag)) {
            signals.push_back(parse_signal(name));
        }
    }
    const fs::path directory = resolve_output(out_flag, {}, "curves");
    const ValidatedRun run = load_run(run_dir);
    const auto curves = run_curves(run, signals);
    emit_curves(curves, directory);
    out << "wrote " << curves.size() << " curve file(s) to " << directory.generic_string() << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Selective-prediction evaluation for multiple-choice runs", "selpred"};
    app.require_subcommand(1);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate run directories and write tables, curves and a config snapshot");
    eval->add_option("--config", eval_args.config_path, "JSON config file")->check(CLI::ExistingFile);
    eval->add_option("--run-dir", eval_args.run_dirs, "Run directory (repeatable; replaces the config list)");
    eval->add_option("--out", eval_args.out, "Output directory (default: config, then $SELPRED_OUT/eval)");
    eval->add_option("--signals", eval_args.signals, "Comma-separated signal names");
    eval->add_option("--variants", eval_args.variants, "Comma-separated prompt variants");
    eval->add_flag("--no-bootstrap", eval_args.no_bootstrap, "Skip the paired bootstrap");
    auto* threads = eval->add_option("--threads", eval_args.threads, "Concurrent runs (0: hardware)");

    SynthSpec spec;
    std::string synth_out;
    std::string synth_variants;
    auto* synth = app.add_subcommand("synth", "Write a synthetic run directory");
    synth->add_option("--n", spec.n_examples, "Number of examples")->required();
    synth->add_option("--options", spec.n_options, "Options per question")->required();
    synth->add_option("--quality", spec.signal_quality, "Self-Verify separation in [0, 1]")->required();
    synth->add_option("--accuracy", spec.accuracy_target, "Target LL-AVG accuracy in (0, 1)")->required();
    synth->add_option("--seed", spec.seed, "Generator seed")->required();
    synth->add_option("--likelihood-quality", spec.likelihood_quality, "LL-AVG separation in [0, 1]");
    synth->add_option("--variants", synth_variants, "Comma-separated prompt variants");
    synth->add_option("--out", synth_out, "Run directory to write (default: $SELPRED_OUT/<model label>)");

    std::string curves_run;
    std::string curves_out;
    std::string curves_signals;
    auto* curves = app.add_subcommand("curves", "Write risk-coverage curve files for one run");
    curves->add_option("--run-dir", curves_run, "Run directory")->required();
    curves->add_option("--out", curves_out, "Output directory (default: $SELPRED_OUT/curves)");
    curves->add_option("--signals", curves_signals, "Comma-separated signal names");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        for (auto* sub : app.get_subcommands()) {
            err << sub->help();
        }
        return kExitConfigError;
    }

    try {
        if (eval->parsed()) {
            eval_args.threads_set = threads->count() > 0;
            return do_eval(eval_args, out, err);
        }
        if (synth->parsed()) {
            if (!synth_variants.empty()) {
                spec.prompt_variants = split_list(synth_variants);
            }
            return do_synth(spec, synth_out, out);
        }
        return do_curves(curves_run, curves_out, curves_signals, out);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace selpred::cli
