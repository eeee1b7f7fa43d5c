#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selpred/signals.hpp"

namespace selpred {

/// Mann-Whitney AUROC: P(c_pos > c_neg) + 0.5 P(c_pos == c_neg), via midranks.
/// Throws DegenerateInputError when only one class is present.
double auroc(std::span<const double> confidences, std::span<const int> labels);

/// Example positions sorted by decreasing confidence; equal confidences keep input order.
std::vector<std::size_t> confidence_order(std::span<const double> confidences);

struct RiskCoveragePoint {
    double coverage = 0.0;
    double risk = 0.0;

    friend bool operator==(const RiskCoveragePoint&, const RiskCoveragePoint&) = default;
};

/// Anchor (0, 1) followed by (k/n, errors_in_top_k / k) for k = 1..n.
struct RiskCoverageCurve {
    std::vector<RiskCoveragePoint> points;

    friend bool operator==(const RiskCoverageCurve&, const RiskCoverageCurve&) = default;
};

RiskCoverageCurve risk_coverage_curve(std::span<const double> confidences, std::span<const int> labels);

/// Trapezoidal area under the curve, anchor included.
double aurc(const RiskCoverageCurve& curve);
double aurc(std::span<const double> confidences, std::span<const int> labels);

/// Number of retained examples for a coverage target: ceil(target * n), at least 1.
std::size_t retained_count(double target, std::size_t n);

/// Risk of the top ceil(target * n) examples. target must lie in (0, 1].
double err_at_coverage(std::span<const double> confidences, std::span<const int> labels, double target);

/// Largest k/n whose top-k risk is <= max_risk; 0 when no prefix qualifies.
double cov_at_error(std::span<const double> confidences, std::span<const int> labels, double max_risk);

double brier(std::span<const double> confidences, std::span<const int> labels);

/// Equal-width binned ECE; bin b covers [(b-1)/B, b/B) and the last bin is closed at 1.
double ece(std::span<const double> confidences, std::span<const int> labels, std::size_t bins = 10);

struct OperatingPoint {
    double target = 0.0;
    double value = 0.0;
};

/// Scalar metrics for one (dataset, model, prompt, signal) cell.
/// auroc is empty when the labels hold a single class.
struct MetricReport {
    std::string dataset;
    std::string model;
    std::string prompt;
    Signal signal = Signal::LlAvg;
    std::size_t n = 0;
    double accuracy = 0.0;
    std::optional<double> auroc;
    double aurc = 0.0;
    double brier = 0.0;
    double ece10 = 0.0;
    std::vector<OperatingPoint> err_at_coverage;
    std::vector<OperatingPoint> cov_at_error;

    std::optional<double> err_at(double target) const;
    std::optional<double> cov_at(double max_risk) const;
};

struct MetricTargets {
    std::vector<double> coverage_targets{0.8, 0.5};
    std::vector<double> risk_targets{0.2, 0.1};
};

MetricReport compute_report(const SignalFrame& frame, const MetricTargets& targets = {});

}  // namespace selpred
