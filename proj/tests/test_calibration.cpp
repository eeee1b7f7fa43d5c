#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "selpred/calibration.hpp"
#include "selpred/errors.hpp"
#include "selpred/metrics.hpp"
#include "selpred/random.hpp"
#include "selpred/synth.hpp"

using namespace selpred;

namespace {

struct ScoredSet {
    std::vector<std::vector<double>> scores;
    std::vector<int> gold;
    std::vector<std::size_t> all;
};

// Gold drawn from softmax(z) so z is calibrated; scores are scale * z.
ScoredSet calibrated_set(std::uint64_t seed, std::size_t n, std::size_t k, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScoredSet set;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(k);
        for (auto& v : z) {
            v = g(rng);
        }
        double mass = 0.0;
        for (double v : z) {
            mass += std::exp(v);
        }
        double draw = u(rng) * mass;
        int gold = static_cast<int>(k) - 1;
        for (std::size_t j = 0; j < k; ++j) {
            draw -= std::exp(z[j]);
            if (draw < 0.0) {
                gold = static_cast<int>(j);
                break;
            }
        }
        for (auto& v : z) {
            v *= scale;
        }
        set.scores.push_back(z);
        set.gold.push_back(gold);
        set.all.push_back(i);
    }
    return set;
}

// Written out separately from the library's NLL.
double reference_nll(const ScoredSet& set, double t) {
    double total = 0.0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const auto& s = set.scores[i];
        double top = s[0];
        for (double v : s) {
            top = std::max(top, v);
        }
        double mass = 0.0;
        for (double v : s) {
            mass += std::exp((v - top) / t);
        }
        total += std::log(mass) - (s[static_cast<std::size_t>(set.gold[i])] - top) / t;
    }
    return total;
}

// Log-spaced scan over the full search range, then a 1e-5 step scan around the best point.
double dense_grid_oracle(const ScoredSet& set) {
    double best_t = 1.0;
    double best = reference_nll(set, 1.0);
    const int coarse = 2000;
    for (int i = 0; i <= coarse; ++i) {
        const double t = 0.05 * std::pow(400.0, static_cast<double>(i) / coarse);
        const double v = reference_nll(set, t);
        if (v < best) {
            best = v;
            best_t = t;
        }
    }
    const double center = best_t;
    const double half_width = center * 0.004;
    for (double t = center - half_width; t <= center + half_width; t += 1e-5) {
        const double v = reference_nll(set, t);
        if (v < best) {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

// Independent bootstrap: same replicate streams, pair-counting AUROC.
struct OracleBootstrap {
    std::vector<double> deltas;
    std::size_t discarded = 0;
};

double pair_auroc(const std::vector<double>& c, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                wins += c[i] > c[j] ? 1.0 : (c[i] == c[j] ? 0.5 : 0.0);
            }
        }
    }
    return wins / pairs;
}

OracleBootstrap oracle_bootstrap(const std::vector<double>& a, const std::vector<double>& b, const std::vector<int>& y,
                                 std::size_t replicates, std::int64_t seed) {
    OracleBootstrap out;
    const std::size_t n = y.size();
    for (std::size_t r = 0; r < replicates; ++r) {
        SeededGenerator rng(derive_stream_seed(static_cast<std::uint64_t>(seed), r));
        std::vector<double> ra;
        std::vector<double> rb;
        std::vector<int> ry;
        for (std::size_t j = 0; j < n; ++j) {
            const auto i = static_cast<std::size_t>(rng.below(n));
            ra.push_back(a[i]);
            rb.push_back(b[i]);
            ry.push_back(y[i]);
        }
        const auto pos = std::count(ry.begin(), ry.end(), 1);
        if (pos == 0 || pos == static_cast<std::ptrdiff_t>(n)) {
            ++out.discarded;
            continue;
        }
        out.deltas.push_back(pair_auroc(ra, ry) - pair_auroc(rb, ry));
    }
    return out;
}

}  // namespace

TEST(SplitCalibration, Sizes) {
    EXPECT_EQ(split_calibration(1000).calibration_indices.size(), 200U);
    EXPECT_EQ(split_calibration(100).calibration_indices.size(), 50U);
    const auto s = split_calibration(51);
    EXPECT_EQ(s.calibration_indices.size(), 50U);
    EXPECT_EQ(s.evaluation_indices.size(), 1U);
    EXPECT_EQ(split_calibration(10).calibration_indices.size(), 9U);
    EXPECT_EQ(split_calibration(2).calibration_indices.size(), 1U);
    EXPECT_EQ(split_calibration(251).calibration_indices.size(), 51U);
}

TEST(SplitCalibration, TooSmallIsDomainError) {
    EXPECT_THROW(split_calibration(1), DomainError);
    EXPECT_THROW(split_calibration(0), DomainError);
}

TEST(SplitCalibration, DisjointCoverDeterministic) {
    for (std::size_t n : {2, 3, 50, 51, 99, 250, 1000, 1172}) {
        const auto s = split_calibration(n);
        EXPECT_FALSE(s.calibration_indices.empty());
        EXPECT_FALSE(s.evaluation_indices.empty());
        std::vector<std::size_t> all = s.calibration_indices;
        all.insert(all.end(), s.evaluation_indices.begin(), s.evaluation_indices.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> identity(n);
        std::iota(identity.begin(), identity.end(), 0);
        EXPECT_EQ(all, identity);
        const auto again = split_calibration(n);
        EXPECT_EQ(again.calibration_indices, s.calibration_indices);
        // Calibration set is the first entries of the seeded shuffle.
        auto order = shuffled_order(n, 42);
        std::vector<std::size_t> head(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s.calibration_indices.size()));
        std::sort(head.begin(), head.end());
        EXPECT_EQ(head, s.calibration_indices);
    }
    EXPECT_NE(split_calibration(500, 0.2, 50, 42).calibration_indices,
              split_calibration(500, 0.2, 50, 43).calibration_indices);
}

TEST(TemperatureGrid, Shape) {
    const auto grid = temperature_grid();
    ASSERT_EQ(grid.size(), 64U);
    EXPECT_EQ(grid.front(), 0.05);
    EXPECT_EQ(grid.back(), 20.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(400.0, 1.0 / 63.0), 1e-12);
    }
}

TEST(FitTemperature, RecoversScaleThreeAgainstDenseGrid) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto set = calibrated_set(seed, 1500, 4, 3.0);
        const auto fit = fit_temperature(set.scores, set.gold, set.all);
        const double oracle = dense_grid_oracle(set);
        EXPECT_NEAR(fit.temperature, 3.0, 0.15) << seed;
        EXPECT_NEAR(oracle, 3.0, 0.15) << seed;
        EXPECT_NEAR(fit.temperature, oracle, 1e-3 * oracle) << seed;
        EXPECT_LE(fit.calibration_nll, reference_nll(set, oracle) + 1e-7 * std::fabs(fit.calibration_nll));
        EXPECT_LE(fit.calibration_nll, temperature_nll(set.scores, set.gold, set.all, 1.0) + 1e-9);
        EXPECT_NEAR(fit.calibration_nll, reference_nll(set, fit.temperature), 1e-9 * fit.calibration_nll);
    }
}

TEST(FitTemperature, NeverWorseThanUnitTemperature) {
    for (std::uint64_t seed = 10; seed < 30; ++seed) {
        const double scale = 0.3 + 0.25 * static_cast<double>(seed % 8);
        const auto set = calibrated_set(seed, 60 + seed, 2 + seed % 4, scale);
        const auto fit = fit_temperature(set.scores, set.gold, set.all);
        EXPECT_LE(fit.calibration_nll, temperature_nll(set.scores, set.gold, set.all, 1.0) + 1e-9);
        EXPECT_GE(fit.temperature, 0.05);
        EXPECT_LE(fit.temperature, 20.0);
    }
}

TEST(FitTemperature, FlatObjectivePicksGridPointNearestOne) {
    const std::vector<std::vector<double>> scores{{-1.0, -1.0, -1.0}, {-1.0, -1.0, -1.0}};
    const std::vector<int> gold{0, 2};
    const std::vector<std::size_t> idx{0, 1};
    const auto grid = temperature_grid();
    const double first = temperature_nll(scores, gold, idx, grid[0]);
    for (double t : grid) {
        ASSERT_EQ(temperature_nll(scores, gold, idx, t), first);
    }
    const auto nearest = *std::min_element(grid.begin(), grid.end(), [](double a, double b) {
        return std::fabs(a - 1.0) < std::fabs(b - 1.0);
    });
    EXPECT_EQ(fit_temperature(scores, gold, idx).temperature, nearest);
}

TEST(FitTemperature, NoWorseThanBestGridPoint) {
    for (std::uint64_t seed = 40; seed < 50; ++seed) {
        const auto set = calibrated_set(seed, 120, 3, 0.2 + static_cast<double>(seed - 40));
        const auto fit = fit_temperature(set.scores, set.gold, set.all);
        double best = INFINITY;
        for (double t : temperature_grid()) {
            best = std::min(best, temperature_nll(set.scores, set.gold, set.all, t));
        }
        EXPECT_LE(fit.calibration_nll, best);
    }
}

TEST(FitTemperature, ScaleConsistency) {
    const auto base = calibrated_set(77, 800, 4, 1.0);
    const double t1 = fit_temperature(base.scores, base.gold, base.all).temperature;
    for (double c : {0.5, 2.0, 4.0}) {
        auto scaled = base;
        for (auto& s : scaled.scores) {
            for (auto& v : s) {
                v *= c;
            }
        }
        const double tc = fit_temperature(scaled.scores, scaled.gold, scaled.all).temperature;
        EXPECT_NEAR(tc / (c * t1), 1.0, 1e-3) << c;
    }
}

TEST(FitTemperature, UsesOnlyCalibrationIndices) {
    auto set = calibrated_set(5, 200, 4, 2.0);
    std::vector<std::size_t> half(set.all.begin(), set.all.begin() + 100);
    const auto fit = fit_temperature(set.scores, set.gold, half);
    for (std::size_t i = 100; i < 200; ++i) {
        set.scores[i] = {100.0, -100.0, 0.0, 0.0};
    }
    EXPECT_EQ(fit_temperature(set.scores, set.gold, half).temperature, fit.temperature);
}

TEST(FitTemperature, Errors) {
    const std::vector<std::vector<double>> scores{{0.0, 1.0}};
    const std::vector<int> gold{0};
    EXPECT_THROW(fit_temperature(scores, gold, std::vector<std::size_t>{}), DomainError);
    EXPECT_THROW(fit_temperature(scores, gold, std::vector<std::size_t>{3}), DomainError);
}

TEST(Percentile, Examples) {
    EXPECT_EQ(percentile(std::vector<double>{5.0}, 0.0), 5.0);
    EXPECT_EQ(percentile(std::vector<double>{5.0}, 63.0), 5.0);
    EXPECT_EQ(percentile(std::vector<double>{1, 2, 3, 4}, 50.0), 2.5);
    EXPECT_EQ(percentile(std::vector<double>{4, 2, 3, 1}, 100.0), 4.0);
    EXPECT_EQ(percentile(std::vector<double>{4, 2, 3, 1}, 0.0), 1.0);
    EXPECT_NEAR(percentile(std::vector<double>{0, 10}, 2.5), 0.25, 1e-15);
    EXPECT_THROW(percentile(std::vector<double>{}, 50.0), DomainError);
    EXPECT_THROW(percentile(std::vector<double>{1.0}, 101.0), DomainError);
}

TEST(Bootstrap, IdenticalSignalsGiveZero) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> c(80);
    std::vector<int> y(80);
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = u(rng);
        y[i] = u(rng) < 0.4 ? 1 : 0;
    }
    const auto r = bootstrap_delta_auroc(c, c, y);
    EXPECT_EQ(r.mean_delta, 0.0);
    EXPECT_EQ(r.ci_low, 0.0);
    EXPECT_EQ(r.ci_high, 0.0);
    EXPECT_EQ(r.kept_replicates + r.discarded_replicates, 2000U);
    EXPECT_EQ(r.requested_replicates, 2000U);
    EXPECT_EQ(r.seed, 42);
}

TEST(Bootstrap, PerfectVersusAntiRankingMatchesOracle) {
    const std::size_t n = 20;
    std::vector<double> a(n);
    std::vector<double> b(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = i % 2 == 0 ? 1 : 0;
        a[i] = y[i] == 1 ? 0.6 + 0.01 * static_cast<double>(i) : 0.1 + 0.01 * static_cast<double>(i);
        b[i] = 1.0 - a[i];
    }
    const auto r = bootstrap_delta_auroc(a, b, y);
    const auto o = oracle_bootstrap(a, b, y, 2000, 42);
    EXPECT_EQ(r.discarded_replicates, o.discarded);
    ASSERT_EQ(r.kept_replicates, o.deltas.size());
    for (double d : o.deltas) {
        ASSERT_EQ(d, 1.0);
    }
    EXPECT_EQ(r.mean_delta, 1.0);
    EXPECT_EQ(r.ci_low, 1.0);
    EXPECT_EQ(r.ci_high, 1.0);
}

TEST(Bootstrap, NoisySignalsMatchOracle) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 15;
    std::vector<double> a(n);
    std::vector<double> b(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Two positives out of 15, so a sizeable share of replicates hold one class.
        y[i] = i < 2 ? 1 : 0;
        a[i] = std::round(u(rng) * 5) / 5 + 0.3 * y[i];
        b[i] = std::round(u(rng) * 5) / 5;
    }
    const auto r = bootstrap_delta_auroc(a, b, y, {500, 9, 1});
    const auto o = oracle_bootstrap(a, b, y, 500, 9);
    EXPECT_EQ(r.discarded_replicates, o.discarded);
    EXPECT_GT(r.discarded_replicates, 0U);
    ASSERT_EQ(r.kept_replicates, o.deltas.size());
    double mean = std::accumulate(o.deltas.begin(), o.deltas.end(), 0.0) / static_cast<double>(o.deltas.size());
    EXPECT_NEAR(r.mean_delta, mean, 1e-12);
    EXPECT_NEAR(r.ci_low, percentile(o.deltas, 2.5), 1e-12);
    EXPECT_NEAR(r.ci_high, percentile(o.deltas, 97.5), 1e-12);
}

TEST(Bootstrap, SingleClassRaises) {
    EXPECT_THROW(bootstrap_delta_auroc(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.3, 0.2, 0.1},
                                       std::vector<int>{1, 1, 1}),
                 DegenerateInputError);
    EXPECT_THROW(bootstrap_delta_auroc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, 0.2},
                                       std::vector<int>{0, 0}),
                 DegenerateInputError);
}

TEST(Bootstrap, AllReplicatesDiscardedIsStatisticsError) {
    // n = 2 with one of each class: roughly half the replicates keep both
    // classes, so a single replicate can be forced to fail by seed search.
    const std::vector<double> a{0.9, 0.1};
    const std::vector<int> y{1, 0};
    bool found = false;
    for (std::int64_t seed = 0; seed < 64 && !found; ++seed) {
        const auto idx = bootstrap_indices(2, seed, 0);
        if (idx[0] == idx[1]) {
            EXPECT_THROW(bootstrap_delta_auroc(a, a, y, {1, seed, 1}), StatisticsError);
            found = true;
        }
    }
    EXPECT_TRUE(found);
}

TEST(Bootstrap, JointResamplingInstrumented) {
    const std::size_t n = 30;
    std::vector<double> a(n);
    std::vector<double> b(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = static_cast<double>(i) / 100.0;          // a value identifies its position
        b[i] = 1.0 - static_cast<double>(i) / 1000.0;   // and so does b
        y[i] = (i * 7) % 3 == 0 ? 1 : 0;
    }
    std::size_t seen = 0;
    bool all_joint = true;
    const auto observer = [&](const BootstrapSample& s) {
        ++seen;
        std::multiset<std::size_t> from_indices(s.indices.begin(), s.indices.end());
        std::multiset<std::size_t> from_a;
        std::multiset<std::size_t> from_b;
        for (std::size_t j = 0; j < n; ++j) {
            from_a.insert(static_cast<std::size_t>(std::lround(s.conf_a[j] * 100.0)));
            from_b.insert(static_cast<std::size_t>(std::lround((1.0 - s.conf_b[j]) * 1000.0)));
            if (s.labels[j] != y[s.indices[j]] || s.conf_a[j] != a[s.indices[j]] || s.conf_b[j] != b[s.indices[j]]) {
                all_joint = false;
            }
        }
        if (from_a != from_indices || from_b != from_indices) {
            all_joint = false;
        }
        EXPECT_EQ(std::vector<std::size_t>(s.indices.begin(), s.indices.end()), bootstrap_indices(n, 42, s.replicate));
    };
    const auto r = bootstrap_delta_auroc(a, b, y, {}, observer);
    EXPECT_EQ(seen, 2000U);
    EXPECT_TRUE(all_joint);
    EXPECT_EQ(r.kept_replicates + r.discarded_replicates, 2000U);
}

TEST(Bootstrap, ThreadCountDoesNotChangeResult) {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<int> y;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < 300; ++i) {
        y.push_back(u(rng) < 0.6 ? 1 : 0);
        a.push_back(u(rng) + 0.2 * y.back());
        b.push_back(u(rng));
    }
    const auto serial = bootstrap_delta_auroc(a, b, y, {2000, 42, 1});
    const auto parallel = bootstrap_delta_auroc(a, b, y, {2000, 42, 4});
    EXPECT_EQ(serial.mean_delta, parallel.mean_delta);
    EXPECT_EQ(serial.ci_low, parallel.ci_low);
    EXPECT_EQ(serial.ci_high, parallel.ci_high);
    EXPECT_EQ(serial.kept_replicates, parallel.kept_replicates);
}

TEST(Bootstrap, IntervalShrinksWithMoreReplicatesOnAverage) {
    // Compare the spread of mean estimates: 2000 replicates vary less across
    // seeds than 200 replicates do.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(120);
    std::vector<double> b(120);
    std::vector<int> y(120);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = u(rng) < 0.5 ? 1 : 0;
        a[i] = u(rng) + 0.3 * y[i];
        b[i] = u(rng) + 0.1 * y[i];
    }
    const auto spread = [&](std::size_t reps) {
        std::vector<double> means;
        for (std::int64_t seed = 0; seed < 12; ++seed) {
            means.push_back(bootstrap_delta_auroc(a, b, y, {reps, seed, 1}).mean_delta);
        }
        const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
        double v = 0.0;
        for (double x : means) {
            v += (x - m) * (x - m);
        }
        return v;
    };
    EXPECT_LT(spread(2000), spread(200));
}

TEST(Bootstrap, InvariantsOnRandomInstances) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 8 + static_cast<std::size_t>(trial) * 5;
        std::vector<double> a(n);
        std::vector<double> b(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = u(rng) < 0.2 ? 1 : 0;
            a[i] = std::round(u(rng) * 4);
            b[i] = u(rng);
        }
        y[0] = 1;
        y[1] = 0;
        std::vector<double> deltas;
        const auto r = bootstrap_delta_auroc(a, b, y, {300, trial, 1}, [&](const BootstrapSample& s) {
            if (s.kept) {
                deltas.push_back(auroc(std::vector<double>(s.conf_a.begin(), s.conf_a.end()),
                                       std::vector<int>(s.labels.begin(), s.labels.end())) -
                                 auroc(std::vector<double>(s.conf_b.begin(), s.conf_b.end()),
                                       std::vector<int>(s.labels.begin(), s.labels.end())));
            }
        });
        EXPECT_LE(r.ci_low, r.ci_high);
        EXPECT_EQ(r.kept_replicates + r.discarded_replicates, 300U);
        const auto [lo, hi] = std::minmax_element(deltas.begin(), deltas.end());
        EXPECT_GE(r.ci_low, *lo);
        EXPECT_LE(r.ci_high, *hi);
    }
}
