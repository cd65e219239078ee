#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "roughlv/error.hpp"

namespace roughlv {

/// Simulated paths of spot, variance and (optionally) the lift factors,
/// sampled on the observation grid. The implicit origin t = 0 (spot 1) is not
/// stored. Matrices are row-major: one row per path.
struct PathBatch {
    std::vector<double> grid;
    std::size_t n_paths = 0;
    std::size_t n_factors = 0;
    std::vector<double> spot;
    std::vector<double> variance;  ///< aggregate variance after truncation, max(v, 0)
    std::vector<double> factors;   ///< path-major, then time, then factor; empty unless requested
    std::uint64_t seed = 0;
    bool antithetic = false;  ///< paths (2j, 2j+1) are antithetic pairs

    [[nodiscard]] std::size_t n_times() const noexcept { return grid.size(); }

    [[nodiscard]] double spot_at(std::size_t path, std::size_t time) const { return spot[path * grid.size() + time]; }
    [[nodiscard]] double variance_at(std::size_t path, std::size_t time) const {
        return variance[path * grid.size() + time];
    }
    [[nodiscard]] double factor_at(std::size_t path, std::size_t time, std::size_t factor) const {
        return factors[(path * grid.size() + time) * n_factors + factor];
    }

    /// Index of grid time t (relative match 1e-12); throws LookupError when off-grid.
    [[nodiscard]] std::size_t time_index(double t) const {
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (std::abs(grid[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
        throw LookupError("time " + std::to_string(t) + " is not on the simulation grid");
    }

    /// Spot values of all paths at one grid time.
    [[nodiscard]] std::vector<double> spot_column(std::size_t time) const {
        std::vector<double> col(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) col[p] = spot_at(p, time);
        return col;
    }
};

/// Mean and standard error of a sample.
struct SampleStats {
    double mean;
    double stderr_;
};

inline SampleStats sample_stats(std::span<const double> x) {
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double var = x.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

/// Sample statistics of per-path values, averaging antithetic pairs first so
/// the standard error reflects the pair correlation.
inline SampleStats path_stats(const PathBatch& batch, std::span<const double> per_path) {
    if (!batch.antithetic) return sample_stats(per_path);
    std::vector<double> pairs(per_path.size() / 2);
    for (std::size_t j = 0; j < pairs.size(); ++j) pairs[j] = 0.5 * (per_path[2 * j] + per_path[2 * j + 1]);
    return sample_stats(pairs);
}

}  // namespace roughlv
