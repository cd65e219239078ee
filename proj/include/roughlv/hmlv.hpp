#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/fourier.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/leverage.hpp"
#include "roughlv/params.hpp"
#include "roughlv/path_batch.hpp"
#include "roughlv/rough_mc.hpp"
#include "roughlv/vanilla.hpp"
#include "roughlv/volsurface.hpp"

namespace roughlv {

/// Monte Carlo repricing of a quote lattice under the HMLV model.
struct HmlvRepricing {
    std::vector<std::vector<double>> model_vols;
    std::vector<std::vector<double>> vol_stderr;  ///< price stderr divided by vega
    std::vector<std::vector<double>> errors;      ///< model minus quoted implied vol
    LeverageRecord leverage;
    std::size_t clamped = 0;
    double max_error = 0.0;
    double max_stderr = 0.0;
};

struct RepricingOptions {
    std::size_t bins = 0;  ///< 0 selects default_bin_count
};

/// Simulates the HMLV model with local vol `surface` on the quote maturities
/// (steps of at most `sim.max_step`) and inverts out-of-the-money prices.
inline HmlvRepricing hmlv_reprice(const ModelParams& params, const LiftSpec& lift, const LocalVolSurface& surface,
                                  const QuoteLattice& quotes, SimConfig sim, const RepricingOptions& opt = {}) {
    quotes.validate();
    sim.time_grid = quotes.maturities;
    const auto run = simulate_hmlv(params, lift, surface, sim, opt.bins);

    HmlvRepricing out;
    out.clamped = run.leverage.total_clamped();
    out.leverage = run.leverage;
    for (std::size_t i = 0; i < quotes.maturities.size(); ++i) {
        const double t = quotes.maturities[i];
        out.model_vols.emplace_back();
        out.vol_stderr.emplace_back();
        out.errors.emplace_back();
        for (double k : quotes.strikes[i]) {
            const OptionKind kind = k < 1.0 ? OptionKind::put : OptionKind::call;
            const McPrice mc = mc_price(run.paths, t, k, kind);
            const double vol = implied_vol(mc.price, t, k, kind);
            const double se = mc.stderr_ / black_vega(t, k, vol);
            out.model_vols[i].push_back(vol);
            out.vol_stderr[i].push_back(se);
            out.errors[i].push_back(vol - quotes.vols[i][out.errors[i].size()]);
            out.max_error = std::max(out.max_error, std::abs(out.errors[i].back()));
            out.max_stderr = std::max(out.max_stderr, se);
        }
    }
    return out;
}

struct LeverageCalibrationConfig {
    SimConfig sim;
    RepricingOptions repricing;
    std::size_t max_passes = 10;   ///< outer passes of simulation and target correction
    double tolerance = 2e-5;       ///< stop once the max implied-vol error is below this
    double damping = 1.0;          ///< fraction of the repricing residual moved per pass
    LocalVolCalibrationConfig local_vol;
};

struct LeverageCalibration {
    LocalVolSurface surface;  ///< nodal local vols feeding the leverage function
    HmlvRepricing initial;    ///< particle method on the input surface
    HmlvRepricing final;      ///< particle method on the returned surface
    std::vector<double> history;
};

/// Particle calibration of the HMLV model. Each pass simulates with the
/// leverage l = eta_hat / sqrt(E[v | S]) rebuilt from the particle cloud at
/// every step, then moves the local-vol targets by the damped repricing
/// residual of that pass
///   target <- target + damping (quoted - model)
/// and recalibrates the nodal values to the new targets with the PDE. The
/// best pass is returned. The seed is kept across passes, so the residual of
/// the same simulation (time discretisation and sampling) is absorbed, as
/// when the leverage is calibrated on the Monte Carlo run used for pricing.
inline LeverageCalibration calibrate_leverage(const ModelParams& params, const LiftSpec& lift,
                                              const LocalVolSurface& surface, const QuoteLattice& quotes,
                                              const LeverageCalibrationConfig& cfg) {
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("leverage damping must lie in (0, 1]");
    LeverageCalibration out{surface, hmlv_reprice(params, lift, surface, quotes, cfg.sim, cfg.repricing), {}, {}};
    out.final = out.initial;
    out.history.push_back(out.initial.max_error);
    LocalVolCalibrationConfig lv = cfg.local_vol;
    lv.delta = surface.delta();
    lv.flat_strike_below_delta = surface.flat_strike_below_delta();
    lv.require_convergence = false;
    QuoteLattice targets = quotes;
    HmlvRepricing run = out.initial;
    std::vector<std::vector<double>> nodes = surface.nodal_values();
    for (std::size_t pass = 0; pass < cfg.max_passes && out.final.max_error > cfg.tolerance; ++pass) {
        for (std::size_t i = 0; i < targets.vols.size(); ++i)
            for (std::size_t j = 0; j < targets.vols[i].size(); ++j)
                targets.vols[i][j] += cfg.damping * (quotes.vols[i][j] - run.model_vols[i][j]);
        const auto cal = calibrate_local_vol(targets, surface.hurst(), lv, &nodes);
        nodes = cal.surface.nodal_values();
        run = hmlv_reprice(params, lift, cal.surface, quotes, cfg.sim, cfg.repricing);
        out.history.push_back(run.max_error);
        if (run.max_error < out.final.max_error) {
            out.final = run;
            out.surface = cal.surface;
        }
    }
    return out;
}

}  // namespace roughlv
