#include "selpred/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "selpred/errors.hpp"
#include "selpred/metrics.hpp"
#include "selpred/random.hpp"

namespace selpred {

CalibrationSplit split_calibration(std::size_t n, double fraction, std::size_t minimum, std::int64_t seed) {
    if (n < 2) {
        throw DomainError("split_calibration: need at least 2 examples");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw DomainError("split_calibration: fraction must lie in (0, 1]");
    }
    const auto proportional = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    const std::size_t size = std::min(std::max(proportional, minimum), n - 1);

    const auto order = shuffled_order(n, seed);
    CalibrationSplit split;
    split.calibration_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
    split.evaluation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(size), order.end());
    std::sort(split.calibration_indices.begin(), split.calibration_indices.end());
    std::sort(split.evaluation_indices.begin(), split.evaluation_indices.end());
    return split;
}

std::vector<double> temperature_grid() {
    std::vector<double> grid(kTemperatureGridPoints);
    const double lo = std::log(kMinTemperature);
    const double hi = std::log(kMaxTemperature);
    for (std::size_t i = 0; i < kTemperatureGridPoints; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(kTemperatureGridPoints - 1);
        grid[i] = std::exp(lo + t * (hi - lo));
    }
    grid.front() = kMinTemperature;
    grid.back() = kMaxTemperature;
    return grid;
}

double temperature_nll(std::span<const std::vector<double>> scores, std::span<const int> gold,
                       std::span<const std::size_t> indices, double temperature) {
    double total = 0.0;
    for (const std::size_t i : indices) {
        const auto& s = scores[i];
        const double top = *std::max_element(s.begin(), s.end());
        double mass = 0.0;
        for (const double v : s) {
            mass += std::exp((v - top) / temperature);
        }
        const double log_prob = (s[static_cast<std::size_t>(gold[i])] - top) / temperature - std::log(mass);
        total -= log_prob;
    }
    return total;
}

TemperatureFit fit_temperature(std::span<const std::vector<double>> scores, std::span<const int> gold,
                               std::span<const std::size_t> calibration_indices) {
    if (calibration_indices.empty()) {
        throw DomainError("fit_temperature: empty calibration set");
    }
    if (scores.size() != gold.size()) {
        throw DomainError("fit_temperature: scores and gold indices differ in length");
    }
    for (const std::size_t i : calibration_indices) {
        if (i >= scores.size()) {
            throw DomainError("fit_temperature: calibration index out of range");
        }
        if (scores[i].size() < 2) {
            throw DomainError("fit_temperature: every score vector needs K >= 2");
        }
        if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= scores[i].size()) {
            throw DomainError("fit_temperature: gold index out of range");
        }
        for (const double v : scores[i]) {
            if (!std::isfinite(v)) {
                throw DomainError("fit_temperature: non-finite score");
            }
        }
    }

    const auto nll = [&](double t) { return temperature_nll(scores, gold, calibration_indices, t); };
    const auto grid = temperature_grid();
    std::vector<double> values(grid.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        values[i] = nll(grid[i]);
        const bool better = values[i] < values[best];
        const bool tie_nearer_one = values[i] == values[best] && std::fabs(grid[i] - 1.0) < std::fabs(grid[best] - 1.0);
        if (better || tie_nearer_one) {
            best = i;
        }
    }

    TemperatureFit fit{grid[best], values[best], grid.size()};

    // Golden-section search on log T between the neighbouring grid points.
    double lo = std::log(grid[best == 0 ? 0 : best - 1]);
    double hi = std::log(grid[std::min(best + 1, grid.size() - 1)]);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = nll(std::exp(x1));
    double f2 = nll(std::exp(x2));
    fit.iterations += 2;
    // Relative width in T space: exp(hi) / exp(lo) - 1 ~ hi - lo.
    while (hi - lo > kTemperatureRelativeTolerance) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = nll(std::exp(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = nll(std::exp(x2));
        }
        ++fit.iterations;
    }
    const double refined = std::exp((lo + hi) / 2.0);
    const double refined_nll = nll(refined);
    ++fit.iterations;
    if (refined_nll < fit.calibration_nll) {
        fit.temperature = refined;
        fit.calibration_nll = refined_nll;
    }
    return fit;
}

double percentile(std::span<const double> values, double q) {
    if (values.empty()) {
        throw DomainError("percentile: empty input");
    }
    if (!(q >= 0.0 && q <= 100.0)) {
        throw DomainError("percentile: q must lie in [0, 100]");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double position = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(position));
    const std::size_t above = std::min(below + 1, sorted.size() - 1);
    const double weight = position - static_cast<double>(below);
    if (weight == 0.0) {
        return sorted[below];
    }
    return sorted[below] + weight * (sorted[above] - sorted[below]);
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::int64_t seed, std::size_t replicate) {
    SeededGenerator rng(derive_stream_seed(seed_bits(seed), replicate));
    std::vector<std::size_t> indices(n);
    for (auto& index : indices) {
        index = static_cast<std::size_t>(rng.below(n));
    }
    return indices;
}

namespace {

struct ReplicateScratch {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<int> y;
};

// Returns the replicate's delta, or nullopt when it holds a single class.
std::optional<double> run_replicate(std::span<const double> conf_a, std::span<const double> conf_b,
                                    std::span<const int> labels, std::int64_t seed, std::size_t replicate,
                                    ReplicateScratch& scratch, const BootstrapObserver* observer) {
    const std::size_t n = labels.size();
    const auto indices = bootstrap_indices(n, seed, replicate);
    scratch.a.resize(n);
    scratch.b.resize(n);
    scratch.y.resize(n);
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = indices[j];
        scratch.a[j] = conf_a[i];
        scratch.b[j] = conf_b[i];
        scratch.y[j] = labels[i];
        positives += static_cast<std::size_t>(labels[i]);
    }
    const bool kept = positives != 0 && positives != n;
    if (observer != nullptr && *observer) {
        (*observer)(BootstrapSample{replicate, indices, scratch.a, scratch.b, scratch.y, kept});
    }
    if (!kept) {
        return std::nullopt;
    }
    return auroc(scratch.a, scratch.y) - auroc(scratch.b, scratch.y);
}

}  // namespace

BootstrapResult bootstrap_delta_auroc(std::span<const double> conf_a, std::span<const double> conf_b,
                                      std::span<const int> labels, const BootstrapOptions& options,
                                      const BootstrapObserver& observer) {
    if (conf_a.size() != labels.size() || conf_b.size() != labels.size()) {
        throw DomainError("bootstrap_delta_auroc: inputs differ in length");
    }
    if (labels.empty()) {
        throw DomainError("bootstrap_delta_auroc: empty input");
    }
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    const auto negatives = std::count(labels.begin(), labels.end(), 0);
    if (positives + negatives != static_cast<std::ptrdiff_t>(labels.size())) {
        throw DomainError("bootstrap_delta_auroc: labels must be 0 or 1");
    }
    if (positives == 0 || negatives == 0) {
        throw DegenerateInputError("bootstrap_delta_auroc: labels contain a single class");
    }

    const std::size_t replicates = options.replicates;
    std::vector<std::optional<double>> deltas(replicates);
    const unsigned threads = observer ? 1U : std::max(1U, options.threads);
    if (threads == 1) {
        ReplicateScratch scratch;
        for (std::size_t r = 0; r < replicates; ++r) {
            deltas[r] = run_replicate(conf_a, conf_b, labels, options.seed, r, scratch, &observer);
        }
    } else {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                ReplicateScratch scratch;
                for (std::size_t r = w; r < replicates; r += threads) {
                    deltas[r] = run_replicate(conf_a, conf_b, labels, options.seed, r, scratch, nullptr);
                }
            });
        }
    }

    std::vector<double> kept;
    kept.reserve(replicates);
    for (const auto& delta : deltas) {
        if (delta) {
            kept.push_back(*delta);
        }
    }
    if (kept.empty()) {
        throw StatisticsError("bootstrap_delta_auroc: every replicate was single-class");
    }

    BootstrapResult result;
    double total = 0.0;
    for (const double d : kept) {
        total += d;
    }
    result.mean_delta = total / static_cast<double>(kept.size());
    result.ci_low = percentile(kept, 2.5);
    result.ci_high = percentile(kept, 97.5);
    result.kept_replicates = kept.size();
    result.discarded_replicates = replicates - kept.size();
    result.requested_replicates = replicates;
    result.seed = options.seed;
    return result;
}

}  // namespace selpred
