// Deliberately naive reference implementations. Do not include metrics.hpp here.
#include <vector>

#include "selpred/errors.hpp"
#include "selpred/synth.hpp"

namespace selpred::oracle {

double auroc_bruteforce(std::span<const double> confidences, std::span<const int> labels) {
    if (confidences.size() != labels.size()) {
        throw DomainError("auroc_bruteforce: length mismatch");
    }
    double credit = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        if (labels[i] != 1) {
            continue;
        }
        for (std::size_t j = 0; j < confidences.size(); ++j) {
            if (labels[j] != 0) {
                continue;
            }
            pairs += 1.0;
            if (confidences[i] > confidences[j]) {
                credit += 1.0;
            } else if (confidences[i] == confidences[j]) {
                credit += 0.5;
            }
        }
    }
    if (pairs == 0.0) {
        throw DegenerateInputError("auroc_bruteforce: single class");
    }
    return credit / pairs;
}

double aurc_bruteforce(std::span<const double> confidences, std::span<const int> labels) {
    const std::size_t n = confidences.size();
    if (n == 0 || labels.size() != n) {
        throw DomainError("aurc_bruteforce: need matching non-empty inputs");
    }
    // Selection order: repeatedly take the most confident unused example,
    // lowest position first among equals.
    std::vector<bool> used(n, false);
    std::vector<std::size_t> ranking;
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) {
                continue;
            }
            if (pick == n || confidences[i] > confidences[pick]) {
                pick = i;
            }
        }
        used[pick] = true;
        ranking.push_back(pick);
    }

    std::vector<double> coverage{0.0};
    std::vector<double> risk{1.0};
    for (std::size_t k = 1; k <= n; ++k) {
        std::vector<int> prefix;
        for (std::size_t t = 0; t < k; ++t) {
            prefix.push_back(labels[ranking[t]]);
        }
        std::size_t wrong = 0;
        for (const int y : prefix) {
            if (y == 0) {
                ++wrong;
            }
        }
        coverage.push_back(static_cast<double>(k) / static_cast<double>(n));
        risk.push_back(static_cast<double>(wrong) / static_cast<double>(k));
    }

    double area = 0.0;
    for (std::size_t t = 0; t + 1 < coverage.size(); ++t) {
        area += (coverage[t + 1] - coverage[t]) * (risk[t] + risk[t + 1]) / 2.0;
    }
    return area;
}

}  // namespace selpred::oracle
