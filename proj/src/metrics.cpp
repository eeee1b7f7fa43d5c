#include "selpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selpred/errors.hpp"

namespace selpred {
namespace {

void check_inputs(std::span<const double> confidences, std::span<const int> labels, const char* what) {
    if (confidences.size() != labels.size()) {
        throw DomainError(std::string(what) + ": confidences and labels differ in length");
    }
    if (confidences.empty()) {
        throw DomainError(std::string(what) + ": empty input");
    }
    for (const int y : labels) {
        if (y != 0 && y != 1) {
            throw DomainError(std::string(what) + ": labels must be 0 or 1");
        }
    }
    for (const double c : confidences) {
        if (!std::isfinite(c)) {
            throw DomainError(std::string(what) + ": non-finite confidence");
        }
    }
}

// errors[k] = number of wrong predictions among the k most confident examples.
std::vector<std::size_t> prefix_errors(std::span<const double> confidences, std::span<const int> labels) {
    const auto order = confidence_order(confidences);
    std::vector<std::size_t> errors(order.size() + 1, 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        errors[k + 1] = errors[k] + (labels[order[k]] == 0 ? 1 : 0);
    }
    return errors;
}

}  // namespace

std::vector<std::size_t> confidence_order(std::span<const double> confidences) {
    std::vector<std::size_t> order(confidences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
    return order;
}

double auroc(std::span<const double> confidences, std::span<const int> labels) {
    check_inputs(confidences, labels, "auroc");
    const std::size_t n = confidences.size();
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw DegenerateInputError("auroc: labels contain a single class");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return confidences[a] < confidences[b]; });

    // Sum of 1-based midranks of the positives. Ranks are half-integers, so
    // doubling keeps the accumulation in exact integer arithmetic.
    std::size_t twice_rank_sum = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && confidences[order[j + 1]] == confidences[order[i]]) {
            ++j;
        }
        const std::size_t twice_midrank = (i + 1) + (j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) {
                twice_rank_sum += twice_midrank;
            }
        }
        i = j + 1;
    }
    // 2U = 2 * rank_sum - n_pos (n_pos + 1)
    const std::size_t twice_u = twice_rank_sum - positives * (positives + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

RiskCoverageCurve risk_coverage_curve(std::span<const double> confidences, std::span<const int> labels) {
    check_inputs(confidences, labels, "risk_coverage_curve");
    const std::size_t n = confidences.size();
    const auto errors = prefix_errors(confidences, labels);
    RiskCoverageCurve curve;
    curve.points.reserve(n + 1);
    curve.points.push_back({0.0, 1.0});
    for (std::size_t k = 1; k <= n; ++k) {
        curve.points.push_back({static_cast<double>(k) / static_cast<double>(n),
                                static_cast<double>(errors[k]) / static_cast<double>(k)});
    }
    return curve;
}

double aurc(const RiskCoverageCurve& curve) {
    double area = 0.0;
    for (std::size_t t = 0; t + 1 < curve.points.size(); ++t) {
        const auto& a = curve.points[t];
        const auto& b = curve.points[t + 1];
        area += (b.coverage - a.coverage) * (a.risk + b.risk) / 2.0;
    }
    return area;
}

double aurc(std::span<const double> confidences, std::span<const int> labels) {
    return aurc(risk_coverage_curve(confidences, labels));
}

std::size_t retained_count(double target, std::size_t n) {
    if (!(target > 0.0 && target <= 1.0)) {
        throw DomainError("coverage target must lie in (0, 1]");
    }
    // The epsilon absorbs products such as 0.7 * 10 = 7.000000000000001.
    const double exact = target * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    return std::clamp<std::size_t>(k, 1, n);
}

double err_at_coverage(std::span<const double> confidences, std::span<const int> labels, double target) {
    check_inputs(confidences, labels, "err_at_coverage");
    const std::size_t k = retained_count(target, confidences.size());
    const auto errors = prefix_errors(confidences, labels);
    return static_cast<double>(errors[k]) / static_cast<double>(k);
}

double cov_at_error(std::span<const double> confidences, std::span<const int> labels, double max_risk) {
    check_inputs(confidences, labels, "cov_at_error");
    const std::size_t n = confidences.size();
    const auto errors = prefix_errors(confidences, labels);
    for (std::size_t k = n; k >= 1; --k) {
        if (static_cast<double>(errors[k]) / static_cast<double>(k) <= max_risk) {
            return static_cast<double>(k) / static_cast<double>(n);
        }
    }
    return 0.0;
}

double brier(std::span<const double> confidences, std::span<const int> labels) {
    check_inputs(confidences, labels, "brier");
    double total = 0.0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double diff = confidences[i] - static_cast<double>(labels[i]);
        total += diff * diff;
    }
    return total / static_cast<double>(confidences.size());
}

double ece(std::span<const double> confidences, std::span<const int> labels, std::size_t bins) {
    if (bins == 0) {
        throw DomainError("ece: bins must be positive");
    }
    check_inputs(confidences, labels, "ece");
    std::vector<std::size_t> count(bins, 0);
    std::vector<double> confidence_sum(bins, 0.0);
    std::vector<std::size_t> correct(bins, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = std::clamp(confidences[i], 0.0, 1.0);
        auto b = static_cast<std::size_t>(std::floor(c * static_cast<double>(bins)));
        b = std::min(b, bins - 1);
        ++count[b];
        confidence_sum[b] += confidences[i];
        correct[b] += static_cast<std::size_t>(labels[i]);
    }
    const auto n = static_cast<double>(confidences.size());
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) {
            continue;
        }
        const auto size = static_cast<double>(count[b]);
        const double accuracy = static_cast<double>(correct[b]) / size;
        const double mean_confidence = confidence_sum[b] / size;
        total += (size / n) * std::fabs(accuracy - mean_confidence);
    }
    return total;
}

std::optional<double> MetricReport::err_at(double target) const {
    for (const auto& point : err_at_coverage) {
        if (point.target == target) {
            return point.value;
        }
    }
    return std::nullopt;
}

std::optional<double> MetricReport::cov_at(double max_risk) const {
    for (const auto& point : cov_at_error) {
        if (point.target == max_risk) {
            return point.value;
        }
    }
    return std::nullopt;
}

MetricReport compute_report(const SignalFrame& frame, const MetricTargets& targets) {
    MetricReport report;
    report.signal = frame.signal;
    report.n = frame.size();
    report.accuracy = frame.accuracy();
    try {
        report.auroc = auroc(frame.confidences, frame.labels);
    } catch (const DegenerateInputError&) {
        report.auroc.reset();
    }
    report.aurc = aurc(frame.confidences, frame.labels);
    report.brier = brier(frame.confidences, frame.labels);
    report.ece10 = ece(frame.confidences, frame.labels, 10);
    for (const double target : targets.coverage_targets) {
        report.err_at_coverage.push_back({target, err_at_coverage(frame.confidences, frame.labels, target)});
    }
    for (const double max_risk : targets.risk_targets) {
        report.cov_at_error.push_back({max_risk, cov_at_error(frame.confidences, frame.labels, max_risk)});
    }
    return report;
}

}  // namespace selpred
