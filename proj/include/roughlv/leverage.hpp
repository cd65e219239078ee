#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "roughlv/error.hpp"

namespace roughlv {

/// Floor applied to conditional variances before taking square roots.
inline constexpr double variance_floor = 1e-10;

/// max(20, floor(sqrt(M) / 5)).
inline std::size_t default_bin_count(std::size_t n_particles) {
    return std::max<std::size_t>(20, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_particles)) / 5.0));
}

/// State of the binned estimator at one time step.
struct BinSnapshot {
    std::vector<double> lower_edges;  ///< smallest spot in each bin, strictly increasing
    std::vector<double> centers;      ///< median spot in each bin
    std::vector<double> means;        ///< mean variance in each bin
    std::vector<std::size_t> counts;
};

/// Estimator of E[v | S = x] from a particle cloud: equal-count quantile bins
/// in S, bin means of v, piecewise-linear interpolation between bin medians
/// and constant extrapolation beyond the outer medians. Bins whose boundary
/// falls inside a run of tied spots are merged.
class BinnedConditionalMean {
public:
    BinnedConditionalMean(std::span<const double> spot, std::span<const double> variance, std::size_t bins) {
        const std::size_t m = spot.size();
        if (variance.size() != m) throw EstimatorError("spot and variance clouds differ in size");
        if (bins == 0) throw EstimatorError("bin count must be positive");
        if (m < bins) throw EstimatorError("fewer particles than bins");

        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Stable: ties keep particle index order.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return spot[a] < spot[b]; });

        std::vector<std::size_t> bounds{0};
        for (std::size_t b = 1; b < bins; ++b) {
            const std::size_t pos = b * m / bins;
            if (pos > bounds.back() && spot[order[pos - 1]] < spot[order[pos]]) bounds.push_back(pos);
        }
        bounds.push_back(m);

        const std::size_t nb = bounds.size() - 1;
        snap_.lower_edges.resize(nb);
        snap_.centers.resize(nb);
        snap_.means.resize(nb);
        snap_.counts.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t first = bounds[b];
            const std::size_t last = bounds[b + 1];
            const std::size_t count = last - first;
            double sum = 0.0;
            for (std::size_t i = first; i < last; ++i) sum += variance[order[i]];
            const std::size_t mid = first + count / 2;
            snap_.lower_edges[b] = spot[order[first]];
            snap_.centers[b] = count % 2 == 1 ? spot[order[mid]] : 0.5 * (spot[order[mid - 1]] + spot[order[mid]]);
            snap_.means[b] = sum / static_cast<double>(count);
            snap_.counts[b] = count;
        }
    }

    [[nodiscard]] double operator()(double x) const {
        const auto& c = snap_.centers;
        const auto& v = snap_.means;
        if (x <= c.front()) return v.front();
        if (x >= c.back()) return v.back();
        const auto it = std::upper_bound(c.begin(), c.end(), x);
        const auto j = static_cast<std::size_t>(it - c.begin());
        const double w = (x - c[j - 1]) / (c[j] - c[j - 1]);
        return (1.0 - w) * v[j - 1] + w * v[j];
    }

    [[nodiscard]] const BinSnapshot& snapshot() const noexcept { return snap_; }

private:
    BinSnapshot snap_;
};

/// Estimates of E[v | S = q] at each query q.
inline std::vector<double> conditional_expectation(std::span<const double> spot, std::span<const double> variance,
                                                   std::span<const double> queries, std::size_t bins) {
    const BinnedConditionalMean est(spot, variance, bins);
    std::vector<double> out;
    out.reserve(queries.size());
    for (double q : queries) {
        if (!(q > 0.0)) throw EstimatorError("queries must be positive moneyness");
        out.push_back(est(q));
    }
    return out;
}

/// l(t, x) = eta_hat / sqrt(max(E[v | S = x], floor)).
inline double leverage_value(double eta_hat, double cond_var) {
    return eta_hat / std::sqrt(std::max(cond_var, variance_floor));
}

struct LeverageStep {
    double time;
    BinSnapshot bins;
    std::size_t clamped;             ///< particles whose conditional variance hit the floor
    std::size_t min_bin_population;  ///< effective particle count of the sparsest bin
};

/// Per-step history of the conditional-expectation estimator in an HMLV run.
struct LeverageRecord {
    std::vector<LeverageStep> steps;

    [[nodiscard]] std::size_t total_clamped() const {
        std::size_t n = 0;
        for (const auto& s : steps) n += s.clamped;
        return n;
    }

    /// Delimited text: step,time,bin_center,bin_mean,bin_count.
    void write_csv(std::ostream& out) const {
        out << "step,time,bin_center,bin_mean,bin_count\n";
        char buf[160];
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& s = steps[i];
            for (std::size_t b = 0; b < s.bins.centers.size(); ++b) {
                std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu\n", i, s.time, s.bins.centers[b],
                              s.bins.means[b], s.bins.counts[b]);
                out << buf;
            }
        }
    }
};

}  // namespace roughlv
