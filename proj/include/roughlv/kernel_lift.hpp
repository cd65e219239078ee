#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "roughlv/error.hpp"

namespace roughlv {

/// Fractional kernel K(t) = t^(H-1/2) / Gamma(H+1/2).
inline double fractional_kernel(double t, double hurst) {
    if (!(t > 0.0)) throw DomainError("fractional kernel is singular at t <= 0");
    if (!(hurst > 0.0 && hurst <= 0.5)) throw DomainError("hurst must lie in (0, 1/2]");
    return std::pow(t, hurst - 0.5) / std::tgamma(hurst + 0.5);
}

/// One exponential term c * exp(-gamma t) of the Markovian lift.
struct LiftNode {
    double weight;  ///< c_i > 0
    double speed;   ///< gamma_i >= 0, mean-reversion speed of the factor
};

/// n-term exponential approximation of the fractional kernel.
struct LiftSpec {
    std::vector<LiftNode> nodes;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }

    /// Sum_i c_i exp(-gamma_i t).
    [[nodiscard]] double kernel(double t) const {
        double sum = 0.0;
        for (const auto& n : nodes) sum += n.weight * std::exp(-n.speed * t);
        return sum;
    }

    /// Integral of the approximating kernel over [0, t].
    [[nodiscard]] double integrated_kernel(double t) const {
        double sum = 0.0;
        for (const auto& n : nodes) sum += n.weight * exp_integral(n.speed, t);
        return sum;
    }

    /// (1 - exp(-gamma t)) / gamma, with its limit t at gamma = 0.
    static double exp_integral(double gamma, double t) {
        const double x = gamma * t;
        if (x < 1e-12) return t * (1.0 - 0.5 * x);
        return -std::expm1(-x) / gamma;
    }

    /// Shortest time scale resolved by the lift, 1 / max gamma_i.
    [[nodiscard]] double shortest_time_scale() const {
        double gmax = 0.0;
        for (const auto& n : nodes) gmax = std::max(gmax, n.speed);
        return gmax > 0.0 ? 1.0 / gmax : INFINITY;
    }

    void validate() const {
        if (nodes.empty()) throw ConfigError("lift has no nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!(nodes[i].weight > 0.0) || !std::isfinite(nodes[i].weight))
                throw ConfigError("lift weights must be positive and finite");
            if (!(nodes[i].speed >= 0.0) || !std::isfinite(nodes[i].speed))
                throw ConfigError("lift speeds must be non-negative and finite");
            if (i > 0 && !(nodes[i].speed > nodes[i - 1].speed))
                throw ConfigError("lift speeds must be strictly increasing");
        }
    }
};

namespace detail {

/// b^p - a^p for 0 < a < b, accurate when b/a is close to one.
inline double power_difference(double a, double b, double p) {
    return std::pow(a, p) * std::expm1(p * std::log(b / a));
}

/// Ratio between the first moment and the mass of gamma^(-H-1/2) on [x, x r],
/// divided by x.
inline double moment_ratio(double r, double hurst) {
    const double a = 0.5 - hurst;
    const double b = 1.5 - hurst;
    return (a / b) * std::expm1(b * std::log(r)) / std::expm1(a * std::log(r));
}

}  // namespace detail

/// Builds the lift from the Laplace measure
///   mu(dgamma) = gamma^(-H-1/2) / (Gamma(H+1/2) Gamma(1/2-H)) dgamma
/// restricted to a geometric partition of [1/horizon, 1/short_scale] into n
/// intervals. Each interval contributes its mass as weight and its mean
/// (first moment over mass) as speed. H = 1/2 yields the exact node (1, 0).
inline LiftSpec build_lift(double hurst, std::size_t n, double horizon, double short_scale) {
    if (n < 1) throw ConfigError("lift needs at least one factor");
    if (!(hurst > 0.0 && hurst <= 0.5)) throw ConfigError("hurst must lie in (0, 1/2]");
    if (hurst == 0.5) return LiftSpec{{LiftNode{1.0, 0.0}}};
    if (!(short_scale > 0.0 && short_scale < horizon) || !std::isfinite(horizon))
        throw ConfigError("lift scales must satisfy 0 < short_scale < horizon");

    const double a = 0.5 - hurst;
    const double b = 1.5 - hurst;
    const double norm = 1.0 / (std::tgamma(hurst + 0.5) * std::tgamma(0.5 - hurst));
    const double lo = 1.0 / horizon;
    const double log_ratio = std::log(horizon / short_scale) / static_cast<double>(n);

    LiftSpec lift;
    lift.nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double left = lo * std::exp(log_ratio * static_cast<double>(i));
        const double right = lo * std::exp(log_ratio * static_cast<double>(i + 1));
        const double mass = norm * detail::power_difference(left, right, a) / a;
        const double moment = norm * detail::power_difference(left, right, b) / b;
        lift.nodes.push_back({mass, moment / mass});
    }
    return lift;
}

/// Partition scales for which build_lift returns speeds spanning exactly
/// [gamma_min, gamma_max]. With a geometric partition of ratio r the speeds
/// satisfy gamma_n / gamma_1 = r^(n-1), so the inversion is closed-form.
struct LiftScales {
    double horizon;
    double short_scale;
};

inline LiftScales tune_lift_scales(double hurst, std::size_t n, double gamma_min, double gamma_max) {
    if (n < 2) throw ConfigError("tuning the speed range needs at least two factors");
    if (!(hurst > 0.0 && hurst < 0.5)) throw ConfigError("tuning requires hurst in (0, 1/2)");
    if (!(gamma_min > 0.0 && gamma_max > gamma_min)) throw ConfigError("need 0 < gamma_min < gamma_max");
    const double log_r = std::log(gamma_max / gamma_min) / static_cast<double>(n - 1);
    const double lo = gamma_min / detail::moment_ratio(std::exp(log_r), hurst);
    const double hi = lo * std::exp(log_r * static_cast<double>(n));
    return {1.0 / lo, 1.0 / hi};
}

struct KernelError {
    double sup;  ///< max relative error over the grid
    double rms;  ///< root-mean-square relative error over the grid
};

/// Relative error |K(t) - sum_i c_i exp(-gamma_i t)| / K(t) on a time grid.
inline KernelError kernel_approx_error(const LiftSpec& lift, double hurst, std::span<const double> t_grid) {
    if (t_grid.empty()) throw ConfigError("kernel error grid is empty");
    double sup = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double t = t_grid[i];
        if (!(t > 0.0)) throw ConfigError("kernel error grid must be strictly positive");
        if (i > 0 && !(t > t_grid[i - 1])) throw ConfigError("kernel error grid must be sorted");
        const double exact = fractional_kernel(t, hurst);
        const double rel = std::abs(exact - lift.kernel(t)) / exact;
        sup = std::max(sup, rel);
        sq += rel * rel;
    }
    return {sup, std::sqrt(sq / static_cast<double>(t_grid.size()))};
}

/// Two columns "c gamma", one node per line, 17 significant digits.
inline void write_lift(std::ostream& out, const LiftSpec& lift) {
    char buf[64];
    for (const auto& n : lift.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", n.weight, n.speed);
        out << buf;
    }
}

inline LiftSpec read_lift(std::istream& in) {
    LiftSpec lift;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        LiftNode node{};
        if (!(row >> node.weight >> node.speed)) throw ParseError("expected two numbers 'c gamma'", lineno);
        lift.nodes.push_back(node);
    }
    lift.validate();
    return lift;
}

}  // namespace roughlv
