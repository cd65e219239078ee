#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/path_batch.hpp"

namespace roughlv {

enum class OptionKind { call, put };

/// Market or model quote in forward moneyness (S0 = 1, zero rates).
struct OptionQuote {
    double maturity;
    double strike;
    double implied_vol;
    OptionKind kind = OptionKind::call;
};

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double intrinsic(double k, OptionKind kind) {
    return kind == OptionKind::call ? std::max(1.0 - k, 0.0) : std::max(k - 1.0, 0.0);
}

namespace detail {

/// Price of the out-of-the-money option (call for k >= 1, put for k < 1)
/// at total standard deviation s = sigma sqrt(t).
inline double otm_black(double k, double s) {
    if (s <= 0.0) return 0.0;
    const double d1 = -std::log(k) / s + 0.5 * s;
    const double d2 = d1 - s;
    if (k >= 1.0) return norm_cdf(d1) - k * norm_cdf(d2);
    return k * norm_cdf(-d2) - norm_cdf(-d1);
}

}  // namespace detail

/// Undiscounted Black price with forward 1.
inline double black_price(double t, double k, double sigma, OptionKind kind = OptionKind::call) {
    if (!(t > 0.0) || !(k > 0.0) || !(sigma >= 0.0)) throw DomainError("black_price needs t > 0, k > 0, sigma >= 0");
    const double otm = detail::otm_black(k, sigma * std::sqrt(t));
    const bool call_is_otm = k >= 1.0;
    if ((kind == OptionKind::call) == call_is_otm) return otm;
    return otm + intrinsic(k, kind);
}

/// dPrice/dsigma, identical for calls and puts.
inline double black_vega(double t, double k, double sigma) {
    const double s = sigma * std::sqrt(t);
    if (s <= 0.0) return 0.0;
    const double d1 = -std::log(k) / s + 0.5 * s;
    return norm_pdf(d1) * std::sqrt(t);
}

/// Black implied volatility. Newton iterations on log-price of the
/// out-of-the-money equivalent, safeguarded by a bisection bracket.
/// Converges to 1e-12 relative on price within 100 iterations.
inline double implied_vol(double price, double t, double k, OptionKind kind = OptionKind::call) {
    if (!(t > 0.0) || !(k > 0.0)) throw DomainError("implied_vol needs t > 0, k > 0");
    const double lower = intrinsic(k, kind);
    const double upper = kind == OptionKind::call ? 1.0 : k;
    if (!(price > lower))
        throw InversionError("price " + std::to_string(price) + " is not above intrinsic value",
                             InversionError::Bound::lower);
    if (!(price < upper))
        throw InversionError("price " + std::to_string(price) + " is not below the upper bound",
                             InversionError::Bound::upper);

    const bool call_is_otm = k >= 1.0;
    const double target = (kind == OptionKind::call) == call_is_otm ? price : price - intrinsic(k, kind);
    if (!(target > 0.0))
        throw InversionError("time value underflows at the intrinsic bound", InversionError::Bound::lower);
    const double sqrt_t = std::sqrt(t);
    const double log_target = std::log(target);

    double lo = 0.0;
    double hi = 1.0;
    while (detail::otm_black(k, hi * sqrt_t) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw InversionError("no volatility reaches the target price", InversionError::Bound::upper);
    }
    // Start from the ATM approximation, clipped into the bracket.
    double sigma = std::sqrt(2.0 * std::numbers::pi / t) * target / std::sqrt(k);
    if (!(sigma > lo && sigma < hi)) sigma = 0.5 * (lo + hi);

    for (int iter = 0; iter < 100; ++iter) {
        const double s = sigma * sqrt_t;
        const double p = detail::otm_black(k, s);
        if (std::abs(p - target) <= 1e-12 * target) return sigma;
        if (p > target)
            hi = sigma;
        else
            lo = sigma;
        double next = 0.5 * (lo + hi);
        const double vega = black_vega(t, k, sigma);
        if (p > 0.0 && vega > 0.0) {
            const double newton = sigma - (std::log(p) - log_target) * p / vega;
            if (newton > lo && newton < hi) next = newton;
        }
        if (hi - lo <= 1e-15 * hi) return next;
        sigma = next;
    }
    return sigma;
}

/// Monte Carlo price and standard error of a vanilla from a path batch.
struct McPrice {
    double price;
    double stderr_;
};

inline double payoff(double spot, double k, OptionKind kind) {
    return kind == OptionKind::call ? std::max(spot - k, 0.0) : std::max(k - spot, 0.0);
}

inline McPrice mc_price(const PathBatch& batch, double t, double k, OptionKind kind = OptionKind::call) {
    const std::size_t ti = batch.time_index(t);
    std::vector<double> pay(batch.n_paths);
    for (std::size_t p = 0; p < batch.n_paths; ++p) pay[p] = payoff(batch.spot_at(p, ti), k, kind);
    const auto st = path_stats(batch, pay);
    return {st.mean, st.stderr_};
}

}  // namespace roughlv
