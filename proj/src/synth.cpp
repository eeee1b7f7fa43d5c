#include "selpred/synth.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "selpred/errors.hpp"
#include "selpred/random.hpp"

namespace selpred {
namespace {

// Mean half-gap between the verification-logit populations of correct and
// incorrect examples at quality 1.
constexpr double kVerifySeparation = 3.0;
// Same for the log-gap between the top two averaged option scores.
constexpr double kLikelihoodSeparation = 3.0;
constexpr std::int64_t kMaxTokens = 8;

std::string short_number(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

}  // namespace

void validate_synth_spec(const SynthSpec& spec) {
    if (spec.n_examples == 0) {
        throw DomainError("synth: n_examples must be positive");
    }
    if (spec.n_options < 2) {
        throw DomainError("synth: n_options must be at least 2");
    }
    if (!(spec.signal_quality >= 0.0 && spec.signal_quality <= 1.0)) {
        throw DomainError("synth: signal_quality must lie in [0, 1]");
    }
    if (!(spec.likelihood_quality >= 0.0 && spec.likelihood_quality <= 1.0)) {
        throw DomainError("synth: likelihood_quality must lie in [0, 1]");
    }
    if (!(spec.accuracy_target > 0.0 && spec.accuracy_target < 1.0)) {
        throw DomainError("synth: accuracy_target must lie in (0, 1)");
    }
    if (spec.prompt_variants.empty()) {
        throw DomainError("synth: at least one prompt variant is required");
    }
}

ValidatedRun generate_run(const SynthSpec& spec) {
    validate_synth_spec(spec);
    SeededGenerator rng(seed_bits(spec.seed));
    const std::size_t k = spec.n_options;
    const double q = spec.signal_quality;

    std::vector<ExampleRecord> records;
    records.reserve(spec.n_examples);
    for (std::size_t i = 0; i < spec.n_examples; ++i) {
        ExampleRecord record;
        char id[32];
        std::snprintf(id, sizeof(id), "synth-%06zu", i);
        record.example_id = id;
        record.order_index = i;

        const auto gold = static_cast<std::size_t>(rng.below(k));
        const bool correct = rng.uniform() < spec.accuracy_target;
        const std::size_t predicted = correct ? gold : (gold + 1 + static_cast<std::size_t>(rng.below(k - 1))) % k;
        record.gold_index = static_cast<std::int64_t>(gold);
        const double sign = correct ? 1.0 : -1.0;

        // Averaged option scores: the predicted option leads the runner-up by
        // a log-normal gap whose location depends on correctness through
        // likelihood_quality.
        const double gap = std::exp(0.5 * sign * kLikelihoodSeparation * spec.likelihood_quality + 0.75 * rng.normal() - 0.5);
        const double top = -rng.uniform(0.3, 2.0);
        bool runner_up_placed = false;
        for (std::size_t j = 0; j < k; ++j) {
            double average = top;
            if (j != predicted) {
                average = top - gap - (runner_up_placed ? rng.uniform(0.0, 1.5) : 0.0);
                runner_up_placed = true;
            }
            const auto tokens = 1 + static_cast<std::int64_t>(rng.below(kMaxTokens));
            record.options.push_back({tokens, average * static_cast<double>(tokens)});
        }

        // Verification logit difference: correctness-driven component scaled
        // by quality plus independent noise scaled by (1 - quality).
        for (const auto& variant : spec.prompt_variants) {
            const double noise = rng.normal();
            const double jitter = rng.uniform();
            const double diff = sign * q * (kVerifySeparation + jitter) + (1.0 - q) * noise;
            const double false_main = 5.0 + 2.0 * rng.normal();
            const double false_alt = false_main - rng.uniform(1.0, 3.0);
            const double false_mass = std::max(false_main, false_alt) +
                                      std::log1p(std::exp(-std::fabs(false_main - false_alt)));
            const double true_each = false_mass + diff - std::numbers::ln2;

            VerifyLogits logits;
            logits.true_logits = {true_each, true_each};
            logits.false_logits = {false_main, false_alt};
            logits.fallback_used = false;
            logits.predicted_index = static_cast<std::int64_t>(predicted);
            record.verify.emplace(variant, std::move(logits));
        }
        records.push_back(std::move(record));
    }

    RunManifest manifest;
    manifest.dataset_name = "synthetic";
    manifest.dataset_config = "K" + std::to_string(k);
    manifest.dataset_split = "test";
    manifest.dataset_revision = "synth-v1";
    manifest.model_id = "synthetic/q" + short_number(spec.signal_quality) + "-acc" +
                        short_number(spec.accuracy_target) + "-llq" + short_number(spec.likelihood_quality) +
                        "-seed" + std::to_string(spec.seed);
    manifest.seed = spec.seed;
    manifest.prompt_variants = spec.prompt_variants;
    manifest.true_token_ids = {1, 2};
    manifest.false_token_ids = {3, 4};
    manifest.example_count = records.size();
    manifest.dataset_label = "Synthetic";
    manifest.model_label = "synth-q" + short_number(spec.signal_quality) + "-s" + std::to_string(spec.seed);
    return validate_run(std::move(manifest), std::move(records));
}

}  // namespace selpred
