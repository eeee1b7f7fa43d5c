#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "selpred/records.hpp"

namespace selpred {

/// Parameters for a synthetic run.
///
/// signal_quality controls how well the verification logits separate correct
/// from incorrect LL-AVG predictions (0: independent of correctness, 1:
/// perfectly separated). likelihood_quality does the same for the LL-AVG
/// confidence.
struct SynthSpec {
    std::size_t n_examples = 200;
    std::size_t n_options = 4;
    double signal_quality = 0.5;
    double accuracy_target = 0.5;
    std::int64_t seed = 42;
    double likelihood_quality = 0.0;
    std::vector<std::string> prompt_variants{"default", "audit_v1"};
};

/// Throws DomainError when a field is out of range.
void validate_synth_spec(const SynthSpec& spec);

/// Deterministic synthetic run; records satisfy every record-model invariant.
ValidatedRun generate_run(const SynthSpec& spec);

/// Independent brute-force references for the ranking metrics. They share no
/// code with the metrics module.
namespace oracle {

/// O(n^2) pair count: 1 per concordant pair, 0.5 per tie, over n_pos * n_neg.
/// Throws DegenerateInputError for a single class.
double auroc_bruteforce(std::span<const double> confidences, std::span<const int> labels);

/// Materializes each retained prefix (most confident first, ties in input
/// order), computes its risk and integrates with the trapezoid rule from (0, 1).
double aurc_bruteforce(std::span<const double> confidences, std::span<const int> labels);

}  // namespace oracle
}  // namespace selpred
