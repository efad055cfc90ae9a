#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lexsel/mathx.hpp"
#include "lexsel/rng.hpp"

namespace lexsel {

// Average ranks (ties share the mean of the positions they occupy), 1-based.
inline std::vector<double> average_ranks(std::span<const double> x) {
    size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double shared = 0.5 * double(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

// Tie-aware Spearman: Pearson correlation of the average-rank transforms.
inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw analysis_error("spearman: length mismatch");
    if (x.size() < 2) {
        Correlation c;
        c.reason = "fewer than two observations";
        return c;
    }
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    auto c = pearson(rx, ry);
    if (!c.defined) c.reason = "zero rank variance";
    return c;
}

// One interannotator-agreement observation: two participants who rated the
// same list.
struct PairAgreement {
    int32_t list;
    int32_t p1, p2;
    Correlation rho;
    int n_items;
};

enum class Statistic { Mean, Median };

inline double evaluate_statistic(Statistic s, std::span<const double> xs) {
    switch (s) {
        case Statistic::Mean: return mean(xs);
        case Statistic::Median: return median_of(std::vector<double>(xs.begin(), xs.end()));
    }
    throw numeric_error("unknown statistic");
}

struct BootstrapCI {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int replicates = 999;
    double level = 0.95;
    bool point_outside = false;  // pathological resample pattern, flagged not fatal
    std::vector<double> replicate_stats;
};

// Percentile bootstrap over resamples-with-replacement; replicate r uses the
// substream (seed, r), so any prefix of the replicate sequence is stable.
inline BootstrapCI bootstrap_ci(std::span<const double> samples, Statistic statistic,
                                int replicates = 999, double level = 0.95, uint64_t seed = 0) {
    if (samples.empty()) throw analysis_error("bootstrap_ci: empty sample");
    BootstrapCI out;
    out.replicates = replicates;
    out.level = level;
    out.point = evaluate_statistic(statistic, samples);
    CounterRng root(seed, 0x626f6f74);  // stream tag: "boot"
    out.replicate_stats.resize(size_t(replicates));
    std::vector<double> resample(samples.size());
    for (int r = 0; r < replicates; ++r) {
        CounterRng rng = root.substream(uint64_t(r));
        for (size_t i = 0; i < samples.size(); ++i)
            resample[i] = samples[rng.next_below(samples.size())];
        out.replicate_stats[size_t(r)] = evaluate_statistic(statistic, resample);
    }
    std::vector<double> sorted = out.replicate_stats;
    std::sort(sorted.begin(), sorted.end());
    double alpha = (1.0 - level) / 2.0;
    out.lo = quantile_sorted(sorted, alpha);
    out.hi = quantile_sorted(sorted, 1.0 - alpha);
    out.point_outside = out.point < out.lo || out.point > out.hi;
    return out;
}

}  // namespace lexsel
