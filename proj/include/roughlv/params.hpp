#pragma once

#include <cmath>
#include <string>

#include "roughlv/error.hpp"

namespace roughlv {

/// Rough-Heston parameters. Spot is normalised to S0 = 1 and rates are zero.
struct ModelParams {
    double v0 = 0.02;      ///< initial variance
    double theta = 0.02;   ///< long-term variance level
    double lambda = 0.3;   ///< mean-reversion speed
    double nu = 0.3;       ///< vol-of-variance
    double rho = -0.7;     ///< spot/variance correlation
    double hurst = 0.1;    ///< Hurst exponent in (0, 1/2]

    /// Fractional order of the Volterra equation, H + 1/2.
    [[nodiscard]] double alpha() const noexcept { return hurst + 0.5; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw ConfigError("invalid model parameters: " + msg); };
        if (!(v0 > 0.0) || !std::isfinite(v0)) fail("v0 must be positive");
        if (!(theta > 0.0) || !std::isfinite(theta)) fail("theta must be positive");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be non-negative");
        // nu = 0 is the deterministic-variance degenerate case.
        if (!(nu >= 0.0) || !std::isfinite(nu)) fail("nu must be non-negative");
        if (!(rho >= -1.0 && rho <= 1.0)) fail("rho must lie in [-1, 1]");
        if (!(hurst > 0.0 && hurst <= 0.5)) fail("hurst must lie in (0, 1/2]");
    }
};

/// The parameter set used throughout the numerical study: v0 = theta = 0.02,
/// lambda = nu = 0.3, rho = -0.7, H = 0.1.
inline ModelParams reference_params() { return ModelParams{}; }

}  // namespace roughlv
