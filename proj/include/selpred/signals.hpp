#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selpred/records.hpp"

namespace selpred {

enum class Signal {
    LlAvg,
    LlSum,
    SelfVerify,
    Margin,
    EntropyConf,
    LlAvgT,
};

/// Display names: "LL-AVG", "LL-SUM", "Self-Verify", "Margin", "EntropyConf", "LL-AVG-T".
std::string_view signal_name(Signal signal);

/// Inverse of signal_name; throws ConfigError for an unknown name.
Signal parse_signal(std::string_view name);

/// All signals in declaration order.
std::span<const Signal> all_signals();

/// Softmax of scores / temperature with max-subtraction.
/// Throws DomainError for empty input, non-finite scores or temperature <= 0.
std::vector<double> softmax(std::span<const double> scores, double temperature = 1.0);

/// log(sum(exp(x))) with max-subtraction. Throws DomainError for empty or non-finite input.
double logsumexp(std::span<const double> values);

/// Logistic sigmoid, evaluated on the side that cannot overflow.
double sigmoid(double x);

/// Argmax with ties broken to the lowest index.
std::size_t argmax(std::span<const double> values);

std::vector<double> averaged_scores(const ExampleRecord& record);
std::vector<double> summed_scores(const ExampleRecord& record);

struct Prediction {
    std::size_t index = 0;
    double confidence = 0.0;
};

/// Prediction and max softmax probability over length-normalized scores.
Prediction ll_avg_signal(const ExampleRecord& record, double temperature = 1.0);

/// Prediction and max softmax probability over summed scores.
Prediction ll_sum_signal(const ExampleRecord& record);

/// sigmoid(logsumexp(true_logits) - logsumexp(false_logits)).
double self_verify_confidence(const VerifyLogits& logits);

/// Top-1 minus top-2 probability. Throws DomainError when K < 2.
double margin_signal(std::span<const double> probs);

/// 1 - H(p) / ln K with 0 log 0 = 0. Throws DomainError when K < 2.
double entropy_confidence(std::span<const double> probs);

/// Per-example confidences for one signal, in order_index order.
///
/// labels carry y_sum for LL-SUM and y_avg for every other signal.
struct SignalFrame {
    Signal signal = Signal::LlAvg;
    std::vector<double> confidences;
    std::vector<std::size_t> predicted_index;
    std::vector<int> labels;
    /// Positions into ValidatedRun::records. Identity except for LL-AVG-T,
    /// which covers only the held-out evaluation examples.
    std::vector<std::size_t> example_positions;

    std::size_t size() const { return confidences.size(); }
    double accuracy() const;
};

struct FrameRequest {
    std::vector<Signal> signals;
    /// Verification prompt variant; required when Self-Verify is requested.
    std::string variant;
    /// Required when LL-AVG-T is requested.
    std::optional<double> temperature;
    /// Restricts the LL-AVG-T frame to these record positions (all when empty).
    std::vector<std::size_t> temperature_positions;
};

/// Builds one frame per requested signal, in request order.
/// Throws ConfigError when the variant is missing from a record or the
/// temperature is missing for LL-AVG-T.
std::vector<SignalFrame> build_signal_frames(const ValidatedRun& run, const FrameRequest& request);

}  // namespace selpred
