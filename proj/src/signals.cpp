#include "selpred/signals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "selpred/errors.hpp"

namespace selpred {
namespace {

constexpr std::array kSignals = {Signal::LlAvg,  Signal::LlSum,       Signal::SelfVerify,
                                 Signal::Margin, Signal::EntropyConf, Signal::LlAvgT};

void require_finite(std::span<const double> values, const char* what) {
    for (const double v : values) {
        if (!std::isfinite(v)) {
            throw DomainError(std::string(what) + ": non-finite input");
        }
    }
}

void require_distribution(std::span<const double> probs, const char* what) {
    if (probs.size() < 2) {
        throw DomainError(std::string(what) + ": needs at least 2 probabilities");
    }
    for (const double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw DomainError(std::string(what) + ": probabilities must be finite and nonnegative");
        }
    }
}

}  // namespace

std::string_view signal_name(Signal signal) {
    switch (signal) {
        case Signal::LlAvg: return "LL-AVG";
        case Signal::LlSum: return "LL-SUM";
        case Signal::SelfVerify: return "Self-Verify";
        case Signal::Margin: return "Margin";
        case Signal::EntropyConf: return "EntropyConf";
        case Signal::LlAvgT: return "LL-AVG-T";
    }
    return "unknown";
}

Signal parse_signal(std::string_view name) {
    for (const Signal s : kSignals) {
        if (signal_name(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown signal '" + std::string(name) +
                      "' (expected LL-AVG, LL-SUM, Self-Verify, Margin, EntropyConf or LL-AVG-T)");
}

std::span<const Signal> all_signals() { return kSignals; }

std::vector<double> softmax(std::span<const double> scores, double temperature) {
    if (scores.empty()) {
        throw DomainError("softmax: empty input");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw DomainError("softmax: temperature must be positive and finite");
    }
    require_finite(scores, "softmax");
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - top) / temperature);
        total += out[i];
    }
    for (double& p : out) {
        p /= total;
    }
    return out;
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) {
        throw DomainError("logsumexp: empty input");
    }
    require_finite(values, "logsumexp");
    const double top = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (const double v : values) {
        total += std::exp(v - top);
    }
    return top + std::log(total);
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) {
        throw DomainError("argmax: empty input");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

std::vector<double> averaged_scores(const ExampleRecord& record) {
    std::vector<double> out;
    out.reserve(record.options.size());
    for (const auto& option : record.options) {
        out.push_back(option.average());
    }
    return out;
}

std::vector<double> summed_scores(const ExampleRecord& record) {
    std::vector<double> out;
    out.reserve(record.options.size());
    for (const auto& option : record.options) {
        out.push_back(option.sum_logprob);
    }
    return out;
}

Prediction ll_avg_signal(const ExampleRecord& record, double temperature) {
    const auto scores = averaged_scores(record);
    const auto probs = softmax(scores, temperature);
    const std::size_t index = argmax(scores);
    return {index, probs[index]};
}

Prediction ll_sum_signal(const ExampleRecord& record) {
    const auto scores = summed_scores(record);
    const auto probs = softmax(scores);
    const std::size_t index = argmax(scores);
    return {index, probs[index]};
}

double self_verify_confidence(const VerifyLogits& logits) {
    const double true_mass = logsumexp(logits.true_logits);
    const double false_mass = logsumexp(logits.false_logits);
    return sigmoid(true_mass - false_mass);
}

double margin_signal(std::span<const double> probs) {
    require_distribution(probs, "margin_signal");
    double first = -1.0;
    double second = -1.0;
    for (const double p : probs) {
        if (p > first) {
            second = first;
            first = p;
        } else if (p > second) {
            second = p;
        }
    }
    return first - second;
}

double entropy_confidence(std::span<const double> probs) {
    require_distribution(probs, "entropy_confidence");
    double entropy = 0.0;
    for (const double p : probs) {
        if (p > 0.0) {
            entropy -= p * std::log(p);
        }
    }
    const double value = 1.0 - entropy / std::log(static_cast<double>(probs.size()));
    // Rounding in the entropy sum can land a few ulps outside [0, 1].
    return std::clamp(value, 0.0, 1.0);
}

double SignalFrame::accuracy() const {
    if (labels.empty()) {
        return 0.0;
    }
    const auto correct = std::accumulate(labels.begin(), labels.end(), std::size_t{0});
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<SignalFrame> build_signal_frames(const ValidatedRun& run, const FrameRequest& request) {
    const auto wants = [&](Signal s) {
        return std::find(request.signals.begin(), request.signals.end(), s) != request.signals.end();
    };
    if (wants(Signal::SelfVerify)) {
        for (const auto& record : run.records) {
            if (!record.verify.contains(request.variant)) {
                throw ConfigError("prompt variant '" + request.variant + "' missing from example '" +
                                  record.example_id + "'");
            }
        }
    }
    if (wants(Signal::LlAvgT) && !request.temperature) {
        throw ConfigError("LL-AVG-T requested without a fitted temperature");
    }

    const std::size_t n = run.records.size();
    std::vector<Prediction> avg(n);
    std::vector<Prediction> sum(n);
    std::vector<std::vector<double>> avg_probs(n);
    std::vector<int> y_avg(n);
    std::vector<int> y_sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& record = run.records[i];
        const auto scores = averaged_scores(record);
        avg_probs[i] = softmax(scores);
        avg[i] = {argmax(scores), avg_probs[i][argmax(scores)]};
        sum[i] = ll_sum_signal(record);
        const auto gold = static_cast<std::size_t>(record.gold_index);
        y_avg[i] = avg[i].index == gold ? 1 : 0;
        y_sum[i] = sum[i].index == gold ? 1 : 0;
    }

    std::vector<std::size_t> all_positions(n);
    std::iota(all_positions.begin(), all_positions.end(), std::size_t{0});

    std::vector<SignalFrame> frames;
    for (const Signal signal : request.signals) {
        SignalFrame frame;
        frame.signal = signal;
        frame.example_positions = all_positions;
        if (signal == Signal::LlAvgT && !request.temperature_positions.empty()) {
            frame.example_positions = request.temperature_positions;
        }
        for (const std::size_t i : frame.example_positions) {
            if (i >= n) {
                throw ConfigError("LL-AVG-T evaluation position out of range");
            }
            double confidence = 0.0;
            switch (signal) {
                case Signal::LlAvg: confidence = avg[i].confidence; break;
                case Signal::LlSum: confidence = sum[i].confidence; break;
                case Signal::SelfVerify:
                    confidence = self_verify_confidence(run.records[i].verify.at(request.variant));
                    break;
                case Signal::Margin: confidence = margin_signal(avg_probs[i]); break;
                case Signal::EntropyConf: confidence = entropy_confidence(avg_probs[i]); break;
                case Signal::LlAvgT:
                    confidence = ll_avg_signal(run.records[i], *request.temperature).confidence;
                    break;
            }
            frame.confidences.push_back(confidence);
            frame.predicted_index.push_back(signal == Signal::LlSum ? sum[i].index : avg[i].index);
            frame.labels.push_back(signal == Signal::LlSum ? y_sum[i] : y_avg[i]);
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

}  // namespace selpred
