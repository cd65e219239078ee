#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/fourier.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/parallel.hpp"
#include "roughlv/path_batch.hpp"
#include "roughlv/vanilla.hpp"
#include "roughlv/volsurface.hpp"

namespace roughlv {

/// Implied vols of a model at one maturity for a batch of strikes.
using SmileFn = std::function<std::vector<double>(double t, std::span<const double> strikes)>;

/// Black implied vols from undiscounted call prices; strikes below the
/// forward are inverted through the put.
inline std::vector<double> smile_from_calls(double t, std::span<const double> strikes, std::span<const double> calls) {
    std::vector<double> out(strikes.size());
    for (std::size_t j = 0; j < strikes.size(); ++j) {
        const double k = strikes[j];
        out[j] = k < 1.0 ? implied_vol(calls[j] - (1.0 - k), t, k, OptionKind::put)
                         : implied_vol(calls[j], t, k, OptionKind::call);
    }
    return out;
}

/// Smile of the lifted model priced by Fourier inversion of its characteristic function.
inline SmileFn lift_smile(const ModelParams& p, const LiftSpec& lift, const FourierConfig& cfg = {}) {
    return [p, lift, cfg](double t, std::span<const double> strikes) {
        const auto calls = lift_call_prices(t, strikes, p, lift, cfg);
        return smile_from_calls(t, strikes, calls);
    };
}

/// Smile of the rough-Heston model from the fractional Riccati solver.
inline SmileFn rough_heston_smile(const ModelParams& p, const FourierConfig& cfg = {}) {
    return [p, cfg](double t, std::span<const double> strikes) {
        const auto calls = rough_heston_call_prices(t, strikes, p, cfg);
        return smile_from_calls(t, strikes, calls);
    };
}

/// Strikes exp(+-zeta_eps t^(1/2-H)) straddling the money at maturity t.
struct SkewStrikes {
    double lower;
    double upper;
};

inline SkewStrikes skew_strikes(double t, double zeta_eps, double hurst) {
    if (!(t > 0.0)) throw DomainError("skew maturity must be positive");
    if (!(zeta_eps > 0.0)) throw DomainError("zeta offset must be positive");
    const double x = zeta_eps * std::pow(t, 0.5 - hurst);
    return {std::exp(-x), std::exp(x)};
}

/// Central difference of implied vol across the skew strikes.
inline double atm_skew_implied(const SmileFn& smile, double t, double zeta_eps, double hurst) {
    const auto ks = skew_strikes(t, zeta_eps, hurst);
    const double strikes[2] = {ks.lower, ks.upper};
    const auto vols = smile(t, strikes);
    return (vols[1] - vols[0]) / (ks.upper - ks.lower);
}

/// Finite-difference widths for implied-vol derivatives in singular coordinates.
struct JetBumps {
    double zeta = 0.01;      ///< absolute bump in zeta
    double rel_theta = 0.01; ///< relative bump in theta
};

namespace detail {

/// Implied-vol jet in (t, k) at the points zeta_m, from differences taken in
/// (theta, zeta) and mapped with
///   d_k = theta^(H-1/2)/k d_zeta,
///   d_t = d_theta + (H-1/2) zeta/theta d_zeta,
///   d_kk = (theta^(2H-1) d_zeta^2 - theta^(H-1/2) d_zeta) / k^2.
inline std::vector<ImpliedVolJet> singular_jets(const SmileFn& smile, double t, std::span<const double> zetas,
                                                double hurst, const JetBumps& bumps) {
    const double dz = bumps.zeta;
    const double scale = std::pow(t, 0.5 - hurst);
    std::vector<double> k_mid, k_t;
    for (double z : zetas) {
        k_mid.push_back(std::exp((z - dz) * scale));
        k_mid.push_back(std::exp(z * scale));
        k_mid.push_back(std::exp((z + dz) * scale));
    }
    const double t_up = t * (1.0 + bumps.rel_theta);
    const double t_dn = t * (1.0 - bumps.rel_theta);
    std::vector<double> k_up, k_dn;
    for (double z : zetas) {
        k_up.push_back(std::exp(z * std::pow(t_up, 0.5 - hurst)));
        k_dn.push_back(std::exp(z * std::pow(t_dn, 0.5 - hurst)));
    }
    const auto s_mid = smile(t, k_mid);
    const auto s_up = smile(t_up, k_up);
    const auto s_dn = smile(t_dn, k_dn);

    std::vector<ImpliedVolJet> jets;
    const double g = std::pow(t, hurst - 0.5);
    for (std::size_t m = 0; m < zetas.size(); ++m) {
        const double sm = s_mid[3 * m], s0 = s_mid[3 * m + 1], sp = s_mid[3 * m + 2];
        const double s_z = (sp - sm) / (2.0 * dz);
        const double s_zz = (sp - 2.0 * s0 + sm) / (dz * dz);
        const double s_theta = (s_up[m] - s_dn[m]) / (t_up - t_dn);
        const double k = k_mid[3 * m + 1];
        jets.push_back({s0, s_theta + (hurst - 0.5) * zetas[m] / t * s_z, g / k * s_z,
                        (g * g * s_zz - g * s_z) / (k * k)});
    }
    return jets;
}

}  // namespace detail

/// Local-vol skew at the money: central difference across the skew strikes of
/// the Dupire local vol of the model smile.
inline double atm_skew_local(const SmileFn& smile, double t, double zeta_eps, double hurst, const JetBumps& bumps = {}) {
    const auto ks = skew_strikes(t, zeta_eps, hurst);
    const double zetas[2] = {-zeta_eps, zeta_eps};
    const auto jets = detail::singular_jets(smile, t, zetas, hurst, bumps);
    return (dupire_local_vol(jets[1], t, ks.upper) - dupire_local_vol(jets[0], t, ks.lower)) / (ks.upper - ks.lower);
}

/// Monte Carlo implied skew with a delta-method standard error: the per-path
/// quantity (payoff_+ / vega_+ - payoff_- / vega_-) / (k_+ - k_-) carries the
/// linearised noise of both implied vols.
struct McSkew {
    double skew;
    double stderr_;
};

inline McSkew mc_atm_skew(const PathBatch& batch, double t, double zeta_eps, double hurst) {
    const auto ks = skew_strikes(t, zeta_eps, hurst);
    const std::size_t ti = batch.time_index(t);
    std::vector<double> put(batch.n_paths), call(batch.n_paths);
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        put[p] = payoff(batch.spot_at(p, ti), ks.lower, OptionKind::put);
        call[p] = payoff(batch.spot_at(p, ti), ks.upper, OptionKind::call);
    }
    const double s_lo = implied_vol(path_stats(batch, put).mean, t, ks.lower, OptionKind::put);
    const double s_hi = implied_vol(path_stats(batch, call).mean, t, ks.upper, OptionKind::call);
    const double vega_lo = black_vega(t, ks.lower, s_lo);
    const double vega_hi = black_vega(t, ks.upper, s_hi);
    const double width = ks.upper - ks.lower;
    std::vector<double> lin(batch.n_paths);
    for (std::size_t p = 0; p < batch.n_paths; ++p) lin[p] = (call[p] / vega_hi - put[p] / vega_lo) / width;
    return {(s_hi - s_lo) / width, path_stats(batch, lin).stderr_};
}

// ---------------------------------------------------------------------------
// Fixed-slope regression of log-skews
// ---------------------------------------------------------------------------

struct RegressionConfig {
    double tolerance = 0.02;         ///< admissible distance of the free slope from beta
    std::size_t min_fit_points = 5;  ///< smallest subset a candidate may leave
};

struct RegressionResult {
    double alpha = 0.0;          ///< intercept with the slope pinned to beta
    double t_crit = 0.0;         ///< selected critical time
    double slope = 0.0;          ///< free slope on the selected subset
    std::size_t points_used = 0;
    std::vector<double> candidates;
    std::vector<double> candidate_slopes;  ///< NaN where too few points remain
};

namespace detail {

inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace detail

/// Scans candidate critical times in increasing order; for each, fits a free
/// slope of log(-skew) against log t on the points with t >= candidate. The
/// smallest candidate whose slope is within tolerance of beta is selected and
/// the intercept alpha = mean(log(-skew) - beta log t) is taken on its subset.
inline RegressionResult fixed_slope_regression(std::span<const double> times, std::span<const double> skews,
                                               double beta, std::span<const double> candidates,
                                               const RegressionConfig& cfg = {}) {
    if (times.size() != skews.size()) throw ConfigError("times and skews differ in length");
    if (times.size() < 8) throw RegressionError("regression needs at least 8 points", std::nan(""));
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw DomainError("regression times must be positive");
        if (!(skews[i] < 0.0)) throw RegressionError("regression needs negative skews", std::nan(""));
    }
    std::vector<double> sorted_candidates(candidates.begin(), candidates.end());
    std::sort(sorted_candidates.begin(), sorted_candidates.end());

    RegressionResult r;
    r.candidates = sorted_candidates;
    double closest = std::numeric_limits<double>::quiet_NaN();
    bool found = false;
    for (double c : sorted_candidates) {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times[i] >= c) {
                x.push_back(std::log(times[i]));
                y.push_back(std::log(-skews[i]));
            }
        if (x.size() < std::max<std::size_t>(cfg.min_fit_points, 2)) {
            r.candidate_slopes.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double slope = detail::ols_slope(x, y);
        r.candidate_slopes.push_back(slope);
        if (std::isnan(closest) || std::abs(slope - beta) < std::abs(closest - beta)) closest = slope;
        if (!found && std::abs(slope - beta) <= cfg.tolerance) {
            found = true;
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += y[i] - beta * x[i];
            r.alpha = acc / static_cast<double>(x.size());
            r.t_crit = c;
            r.slope = slope;
            r.points_used = x.size();
        }
    }
    if (!found) throw RegressionError("no critical time attains the slope tolerance", closest);
    return r;
}

inline RegressionResult fixed_slope_regression(std::span<const double> times, std::span<const double> skews,
                                               double beta, const RegressionConfig& cfg = {}) {
    return fixed_slope_regression(times, skews, beta, times, cfg);
}

// ---------------------------------------------------------------------------
// Skew-ratio study
// ---------------------------------------------------------------------------

/// `count` log-spaced maturities covering [lo, hi].
inline std::vector<double> log_ladder(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0 && hi > lo) || count < 2) throw ConfigError("ladder needs 0 < lo < hi and two points");
    std::vector<double> out(count);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    return out;
}

struct SkewStudyConfig {
    double hurst = 0.1;
    std::vector<double> ladder;          ///< maturities, increasing
    double zeta_eps = 0.05;
    std::vector<double> sensitivity_eps{0.025, 0.1};  ///< extra offsets reported for the implied skew
    JetBumps bumps;
    RegressionConfig regression;
    std::vector<double> critical_search;  ///< candidate critical times; the ladder when empty
    unsigned threads = 1;

    [[nodiscard]] double beta() const { return hurst - 0.5; }

    void validate() const {
        if (!(hurst > 0.0 && hurst <= 0.5)) throw ConfigError("hurst must lie in (0, 1/2]");
        if (ladder.size() < 8) throw ConfigError("skew ladder needs at least 8 maturities");
        for (std::size_t i = 0; i < ladder.size(); ++i)
            if (!(ladder[i] > 0.0) || (i > 0 && !(ladder[i] > ladder[i - 1])))
                throw ConfigError("skew ladder must be positive and increasing");
        if (!(zeta_eps > 0.0)) throw ConfigError("zeta offset must be positive");
        if (!(bumps.zeta > 0.0 && bumps.zeta < zeta_eps)) throw ConfigError("zeta bump must lie in (0, zeta_eps)");
        if (!(bumps.rel_theta > 0.0 && bumps.rel_theta < 0.5)) throw ConfigError("theta bump must lie in (0, 0.5)");
    }
};

struct SkewPoint {
    double t;
    double implied_skew;
    double local_skew;
    double y_sigma;  ///< log(-implied skew) - beta log t
    double y_eta;    ///< log(-local skew) - beta log t
    bool below_tau_short;
    std::string source;
    std::vector<double> sensitivity;  ///< implied skew at each sensitivity offset; NaN where unresolvable
};

struct SkewStudyResult {
    std::vector<SkewPoint> points;
    RegressionResult sigma_fit;
    RegressionResult eta_fit;
    double ratio = 0.0;      ///< exp(alpha_eta - alpha_sigma)
    double tau_short = 0.0;  ///< 1 / max gamma of the lift
    double hurst = 0.0;
};

/// Implied and local ATM skews over the ladder from `smile`, the fixed-slope
/// regressions of both series and the skew ratio exp(alpha_eta - alpha_sigma).
inline SkewStudyResult skew_ratio_study(const SmileFn& smile, double tau_short, const SkewStudyConfig& cfg,
                                        const std::string& source = "fourier") {
    cfg.validate();
    const std::size_t n = cfg.ladder.size();
    SkewStudyResult res;
    res.hurst = cfg.hurst;
    res.tau_short = tau_short;
    res.points.resize(n);
    const double beta = cfg.beta();
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const double t = cfg.ladder[i];
        const auto ks = skew_strikes(t, cfg.zeta_eps, cfg.hurst);
        const double zetas[2] = {-cfg.zeta_eps, cfg.zeta_eps};
        const auto jets = detail::singular_jets(smile, t, zetas, cfg.hurst, cfg.bumps);
        SkewPoint pt;
        pt.t = t;
        pt.implied_skew = (jets[1].sigma - jets[0].sigma) / (ks.upper - ks.lower);
        pt.local_skew = (dupire_local_vol(jets[1], t, ks.upper) - dupire_local_vol(jets[0], t, ks.lower)) /
                        (ks.upper - ks.lower);
        pt.y_sigma = std::log(-pt.implied_skew) - beta * std::log(t);
        pt.y_eta = std::log(-pt.local_skew) - beta * std::log(t);
        pt.below_tau_short = t < tau_short;
        pt.source = source;
        // Wider offsets move further out in total standard deviations as t
        // shrinks; their prices can fall below the pricer's resolution.
        for (double e : cfg.sensitivity_eps) {
            try {
                pt.sensitivity.push_back(atm_skew_implied(smile, t, e, cfg.hurst));
            } catch (const InversionError&) {
                pt.sensitivity.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        res.points[i] = std::move(pt);
    });
    std::vector<double> ts, si, lo;
    for (const auto& p : res.points) {
        ts.push_back(p.t);
        si.push_back(p.implied_skew);
        lo.push_back(p.local_skew);
    }
    const std::span<const double> search = cfg.critical_search.empty() ? std::span<const double>(ts)
                                                                        : std::span<const double>(cfg.critical_search);
    res.sigma_fit = fixed_slope_regression(ts, si, beta, search, cfg.regression);
    res.eta_fit = fixed_slope_regression(ts, lo, beta, search, cfg.regression);
    res.ratio = std::exp(res.eta_fit.alpha - res.sigma_fit.alpha);
    return res;
}

/// Lift-model study with Fourier-sourced skews.
inline SkewStudyResult skew_ratio_study(const ModelParams& p, const LiftSpec& lift, const SkewStudyConfig& cfg,
                                        const FourierConfig& fourier = {}) {
    return skew_ratio_study(lift_smile(p, lift, fourier), lift.shortest_time_scale(), cfg, "fourier");
}

/// Plot table: log t, y_sigma, y_eta, the two fitted levels, then raw skews.
inline void write_skew_study(std::ostream& out, const SkewStudyResult& r) {
    out << "log_t,y_sigma,y_eta,fit_sigma,fit_eta,implied_skew,local_skew,below_tau_short,source\n";
    char buf[256];
    for (const auto& p : r.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,", std::log(p.t), p.y_sigma,
                      p.y_eta, r.sigma_fit.alpha, r.eta_fit.alpha, p.implied_skew, p.local_skew,
                      p.below_tau_short ? 1 : 0);
        out << buf << p.source << '\n';
    }
}

}  // namespace roughlv
