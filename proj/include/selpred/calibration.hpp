#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace selpred {

struct CalibrationSplit {
    std::vector<std::size_t> calibration_indices;
    std::vector<std::size_t> evaluation_indices;
};

/// Held-out calibration subset of size min(max(ceil(fraction n), minimum), n - 1),
/// taken as the first positions of shuffled_order(n, seed). Both index lists
/// are returned in ascending order. Throws DomainError when n < 2.
CalibrationSplit split_calibration(std::size_t n, double fraction = 0.2, std::size_t minimum = 50,
                                   std::int64_t seed = 42);

/// Temperature search bounds and grid.
inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;
inline constexpr std::size_t kTemperatureGridPoints = 64;
inline constexpr double kTemperatureRelativeTolerance = 1e-4;

/// The 64-point log-spaced grid over [kMinTemperature, kMaxTemperature].
std::vector<double> temperature_grid();

/// -sum_{i in indices} log softmax(scores_i / T)[gold_i]  (nats, summed).
double temperature_nll(std::span<const std::vector<double>> scores, std::span<const int> gold,
                       std::span<const std::size_t> indices, double temperature);

struct TemperatureFit {
    double temperature = 1.0;
    double calibration_nll = 0.0;
    std::size_t iterations = 0;
};

/// Minimizes temperature_nll over [0.05, 20]: best point of the log grid
/// (exact ties go to the point nearest 1.0), then golden-section search in
/// log T on the bracket formed by its grid neighbours, stopped at relative
/// width 1e-4. The refined point is kept only if it strictly improves on the
/// grid point. Throws DomainError for an empty calibration set or invalid input.
TemperatureFit fit_temperature(std::span<const std::vector<double>> scores, std::span<const int> gold,
                               std::span<const std::size_t> calibration_indices);

/// Empirical percentile with linear interpolation between order statistics
/// (position q/100 * (n - 1)). Throws DomainError for empty input or q outside [0, 100].
double percentile(std::span<const double> values, double q);

struct BootstrapOptions {
    std::size_t replicates = 2000;
    std::int64_t seed = 42;
    /// Worker threads; results do not depend on this value.
    unsigned threads = 1;
};

struct BootstrapResult {
    double mean_delta = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t kept_replicates = 0;
    std::size_t discarded_replicates = 0;
    std::size_t requested_replicates = 0;
    std::int64_t seed = 42;
};

/// Sees every replicate's resample: the drawn indices and the three gathered arrays.
struct BootstrapSample {
    std::size_t replicate = 0;
    std::span<const std::size_t> indices;
    std::span<const double> conf_a;
    std::span<const double> conf_b;
    std::span<const int> labels;
    bool kept = false;
};
using BootstrapObserver = std::function<void(const BootstrapSample&)>;

/// The n indices resampled with replacement for one replicate. Replicate r
/// draws from SeededGenerator(derive_stream_seed(seed, r)), so results are
/// identical for any thread count.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::int64_t seed, std::size_t replicate);

/// Percentile bootstrap of auroc(conf_a) - auroc(conf_b) under joint resampling.
/// Single-class replicates are discarded; `replicates` counts draws, not keeps.
/// Throws DegenerateInputError when labels hold one class and StatisticsError
/// when every replicate is discarded. An observer forces serial execution.
BootstrapResult bootstrap_delta_auroc(std::span<const double> conf_a, std::span<const double> conf_b,
                                      std::span<const int> labels, const BootstrapOptions& options = {},
                                      const BootstrapObserver& observer = {});

}  // namespace selpred
