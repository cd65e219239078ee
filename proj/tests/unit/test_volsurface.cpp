#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

// Boost 1.74's pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "roughlv/fourier.hpp"
#include "roughlv/volsurface.hpp"

using namespace roughlv;

namespace {

QuoteLattice flat_quotes(double vol) {
    QuoteLattice q;
    q.maturities = {0.1, 0.5, 1.0};
    q.strikes = {{0.95, 1.0, 1.05}, {0.9, 1.0, 1.1}, {0.85, 1.0, 1.15}};
    q.vols.assign(3, std::vector<double>(3, vol));
    return q;
}

QuoteLattice step_lattice() {
    QuoteLattice q;
    q.maturities = {0.25, 1.0};
    q.strikes = {{0.9, 1.0, 1.1}, {0.8, 1.0, 1.2}};
    q.vols = {{0.11, 0.1, 0.09}, {0.33, 0.3, 0.27}};
    return q;
}

}  // namespace

TEST(SingularCoords, Examples) {
    EXPECT_EQ(to_singular_coords(0.37, 1.0, 0.1).zeta, 0.0);
    EXPECT_NEAR(to_singular_coords(1.0, std::exp(1.0), 0.1).zeta, 1.0, 1e-15);
    EXPECT_NEAR(to_singular_coords(0.01, 1.1, 0.1).zeta, std::exp(-0.4 * std::log(0.01)) * std::log1p(0.1), 1e-14);
    EXPECT_NEAR(to_singular_coords(0.01, 1.1, 0.1).zeta, 0.6014, 5e-5);
    EXPECT_THROW(to_singular_coords(0.0, 1.0, 0.1), DomainError);
    EXPECT_THROW(to_singular_coords(1.0, 0.0, 0.1), DomainError);
}

TEST(SingularCoords, RoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lt(std::log(1e-6), std::log(10.0)), lk(-1.5, 1.5), h(0.01, 0.5);
    for (int i = 0; i < 10000; ++i) {
        const double t = std::exp(lt(rng)), k = std::exp(lk(rng)), hurst = h(rng);
        const auto s = to_singular_coords(t, k, hurst);
        const auto back = from_singular_coords(s.theta, s.zeta, hurst);
        ASSERT_NEAR(back.t, t, 1e-14 * t);
        ASSERT_NEAR(back.k, k, 1e-14 * k);
    }
}

TEST(Dupire, FlatSurfaceIsExact) {
    for (double s : {0.05, 0.2, 0.731})
        for (double t : {1e-3, 0.5, 4.0})
            for (double k : {0.5, 1.0, 1.7}) EXPECT_EQ(dupire_local_vol(ImpliedVolJet{s, 0.0, 0.0, 0.0}, t, k), s);
    const auto flat = [](double, double) { return 0.2; };
    EXPECT_EQ(dupire_local_vol(flat, 0.7, 1.1), 0.2);
}

TEST(Dupire, StrikeIndependentTermStructure) {
    const auto s = [](double t) { return 0.2 + 0.05 * t - 0.01 * t * t; };
    const auto ds = [](double t) { return 0.05 - 0.02 * t; };
    for (double t : {0.01, 0.3, 1.0, 2.5})
        for (double k : {0.6, 1.0, 1.5}) {
            const double expected = std::sqrt(s(t) * s(t) + 2.0 * s(t) * t * ds(t));
            EXPECT_NEAR(dupire_local_vol(ImpliedVolJet{s(t), ds(t), 0.0, 0.0}, t, k), expected, 1e-10 * expected);
            const auto surface = [&](double tt, double) { return s(tt); };
            EXPECT_NEAR(dupire_local_vol(surface, t, k), expected, 1e-7 * expected);
        }
}

TEST(Dupire, MatchesPriceSpaceOracleOnHestonSmile) {
    ModelParams p;
    p.hurst = 0.5;
    const auto price = [&](double t, double k) {
        const double ks[1] = {k};
        return heston_call_prices(t, ks, p)[0];
    };
    const auto implied = [&](double t, double k) {
        const double c = price(t, k);
        return k < 1.0 ? implied_vol(c - (1.0 - k), t, k, OptionKind::put) : implied_vol(c, t, k);
    };
    for (double t : {0.25, 0.5, 1.0})
        for (double k : {0.9, 0.95, 1.0, 1.05, 1.1}) {
            const double ht = 1e-3, hk = 2e-3;
            const double c_t = (price(t + ht, k) - price(t - ht, k)) / (2.0 * ht);
            const double c_kk = (price(t, k + hk) - 2.0 * price(t, k) + price(t, k - hk)) / (hk * hk);
            const double oracle = std::sqrt(c_t / (0.5 * k * k * c_kk));
            EXPECT_NEAR(dupire_local_vol(implied, t, k), oracle, 1e-3 * oracle) << t << " " << k;
        }
}

TEST(Dupire, ArbitrageErrorsCarryLocation) {
    try {
        dupire_local_vol(ImpliedVolJet{0.2, 0.0, 0.0, -500.0}, 0.5, 1.2);
        FAIL();
    } catch (const ArbitrageError& e) {
        EXPECT_EQ(e.time(), 0.5);
        EXPECT_EQ(e.strike(), 1.2);
    }
    EXPECT_THROW(dupire_local_vol(ImpliedVolJet{0.2, -1.0, 0.0, 0.0}, 0.5, 1.0), ArbitrageError);
}

TEST(MonotoneCubic, RandomMonotoneSlices) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> nodes(4, 9);
    std::uniform_real_distribution<double> gap(0.01, 1.0), rise(0.0, 1.0), coin(0.0, 1.0);
    for (int slice = 0; slice < 1000; ++slice) {
        const int n = nodes(rng);
        const bool increasing = coin(rng) < 0.5;
        std::vector<double> x{-2.0 * gap(rng)}, y{coin(rng)};
        for (int i = 1; i < n; ++i) {
            x.push_back(x.back() + gap(rng));
            // Flat stretches are included on purpose.
            const double dy = coin(rng) < 0.2 ? 0.0 : rise(rng);
            y.push_back(y.back() + (increasing ? dy : -dy));
        }
        const MonotoneCubic f(x, y);
        auto xr = x;
        auto yr = y;
        const boost::math::interpolators::pchip<std::vector<double>> ref(std::move(xr), std::move(yr));
        for (int i = 0; i < n; ++i) ASSERT_EQ(f(x[i]), y[i]);
        double prev = f(x.front() - 1.0);
        EXPECT_EQ(prev, y.front());
        EXPECT_EQ(f(x.back() + 1.0), y.back());
        for (int i = 0; i + 1 < n; ++i) {
            const double lo = std::min(y[i], y[i + 1]), hi = std::max(y[i], y[i + 1]);
            for (int s = 0; s <= 50; ++s) {
                const double xs = s == 50 ? x[i + 1] : x[i] + (x[i + 1] - x[i]) * s / 50.0;
                const double v = f(xs);
                ASSERT_GE(v, lo - 1e-15);
                ASSERT_LE(v, hi + 1e-15);
                if (increasing)
                    ASSERT_GE(v, prev - 1e-15);
                else
                    ASSERT_LE(v, prev + 1e-15);
                // The reference monotone construction shares the bracket.
                ASSERT_LE(std::abs(v - ref(xs)), hi - lo + 1e-14);
                prev = v;
            }
        }
    }
}

TEST(MonotoneCubic, ReproducesLinearData) {
    const MonotoneCubic f({0.0, 0.3, 1.0, 2.0}, {1.0, 1.6, 3.0, 5.0});
    for (double x = 0.0; x <= 2.0; x += 0.01) EXPECT_NEAR(f(x), 1.0 + 2.0 * x, 1e-14);
    EXPECT_THROW(MonotoneCubic({0.0, 0.0}, {1.0, 2.0}), ConfigError);
}

TEST(LocalVolSurface, ExactAtNodes) {
    const auto q = step_lattice();
    const auto s = LocalVolSurface::from_quotes(q, 0.1, 1.0 / 730.0);
    for (std::size_t i = 0; i < q.maturities.size(); ++i)
        for (std::size_t j = 0; j < q.strikes[i].size(); ++j)
            EXPECT_EQ(interpolate_psi(s, q.maturities[i], q.strikes[i][j]), q.vols[i][j]);
    EXPECT_THROW(interpolate_psi(s, 0.0, 1.0), DomainError);
}

TEST(LocalVolSurface, SlicesAreRightClosedAndFlatInTimeAtFixedZeta) {
    const auto s = LocalVolSurface::from_quotes(step_lattice(), 0.1, 1.0 / 730.0);
    EXPECT_EQ(s(0.25, 1.0), 0.1);
    EXPECT_EQ(s(0.2500001, 1.0), 0.3);
    EXPECT_EQ(s(1e-6, 1.0), 0.1);
    EXPECT_EQ(s(50.0, 1.0), 0.3);
    // Same zeta at two times inside a slice gives the same value.
    const double zeta = to_singular_coords(0.25, 1.05, 0.1).zeta;
    for (double t : {0.3, 0.6, 0.99}) {
        const double k = from_singular_coords(t, zeta, 0.1).k;
        EXPECT_NEAR(s(t, k), s(1.0, from_singular_coords(1.0, zeta, 0.1).k), 1e-14);
    }
    // Flat extrapolation beyond the outer nodes.
    EXPECT_EQ(s(1.0, 5.0), 0.27);
    EXPECT_EQ(s(1.0, 0.2), 0.33);
}

TEST(LocalVolSurface, BelowCutoffAtFixedStrike) {
    const double delta = 1e-3;
    const auto zeta_flat = LocalVolSurface::from_quotes(step_lattice(), 0.1, delta, false);
    const auto strike_flat = LocalVolSurface::from_quotes(step_lattice(), 0.1, delta, true);
    for (double t : {1e-6, 1e-4, 5e-4}) {
        EXPECT_EQ(strike_flat(t, 1.01), strike_flat(delta, 1.01));
        EXPECT_EQ(zeta_flat(t, 1.01), zeta_flat(0.2, from_singular_coords(0.2, to_singular_coords(t, 1.01, 0.1).zeta, 0.1).k));
    }
}

TEST(Pde, FlatSurfaceReproducesBlack) {
    const auto q = flat_quotes(0.2);
    const auto flat = [](double, double) { return 0.2; };
    const auto worst = [&](const PdeConfig& cfg) {
        const auto calls = pde_call_prices(flat, q.maturities, q.strikes, 0.2, cfg);
        double e = 0.0;
        for (const auto& row : lattice_implied_vols(q.maturities, q.strikes, calls))
            for (double v : row) e = std::max(e, std::abs(v - 0.2));
        return e;
    };
    PdeConfig fine;
    fine.space_nodes = 1600;
    fine.max_dt = 1.0 / 1460.0;
    const double coarse = worst(PdeConfig{});
    EXPECT_LE(coarse, 1e-4);
    EXPECT_LE(worst(fine), 0.25 * coarse);
}

TEST(CalibrateLocalVol, FlatQuotesConvergeToFlatSurface) {
    // On a fine grid the nodes need not absorb discretisation error.
    LocalVolCalibrationConfig cfg;
    cfg.pde.space_nodes = 1600;
    cfg.pde.max_dt = 1.0 / 1460.0;
    const auto cal = calibrate_local_vol(flat_quotes(0.2), 0.1, cfg);
    EXPECT_LE(cal.max_error(), 1e-5);
    for (const auto& row : cal.surface.nodal_values())
        for (double v : row) EXPECT_NEAR(v, 0.2, 2e-5);
}

TEST(CalibrateLocalVol, SyntheticQuotesWithinOneBasisPoint) {
    std::ifstream in(std::string(ROUGHLV_DATA_DIR) + "/synthetic_quotes.csv");
    ASSERT_TRUE(in.good());
    const auto q = read_quotes(in);
    EXPECT_EQ(q.maturities.size(), 6u);
    EXPECT_EQ(q.quote_count(), 30u);
    const auto cal = calibrate_local_vol(q, 0.1);
    EXPECT_LE(cal.max_error(), 1e-4);
    const auto& h = cal.history;
    ASSERT_GE(h.size(), 3u);
    EXPECT_LE(h[h.size() - 1], h[h.size() - 2]);
    EXPECT_LE(h[h.size() - 2], h[h.size() - 3]);
    // Repricing the returned surface reproduces the reported errors.
    const auto again = reprice_local_vol(cal.surface, q);
    EXPECT_DOUBLE_EQ(again.max_error(), cal.max_error());
}

TEST(CalibrateLocalVol, Errors) {
    auto q = flat_quotes(0.2);
    LocalVolCalibrationConfig cfg;
    cfg.max_iterations = 1;
    cfg.tolerance = 1e-14;
    try {
        calibrate_local_vol(q, 0.1, cfg);
        FAIL();
    } catch (const CalibrationError& e) {
        EXPECT_EQ(e.residuals().size(), 3u);
    }
    q.vols[0][2] = 1e-4;
    EXPECT_THROW(calibrate_local_vol(q, 0.1), ArbitrageError);
    q.maturities = {0.5, 0.1, 1.0};
    EXPECT_THROW(calibrate_local_vol(q, 0.1), ConfigError);
}

TEST(QuoteIo, RoundTripAndErrors) {
    const auto q = step_lattice();
    std::stringstream ss;
    write_quotes(ss, q);
    const auto back = read_quotes(ss);
    EXPECT_EQ(back.maturities, q.maturities);
    EXPECT_EQ(back.strikes, q.strikes);
    EXPECT_EQ(back.vols, q.vols);

    std::istringstream bad_header("t,k,v\n1,1,0.2\n");
    EXPECT_THROW(read_quotes(bad_header), ParseError);
    std::istringstream bad_cell("# note\nmaturity,strike,implied_vol\n1,1,0.2\n1,1.1,abc\n");
    try {
        read_quotes(bad_cell);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_EQ(e.category(), ErrorCategory::data);
    }
    std::istringstream columns("maturity,strike,implied_vol\n1,1\n");
    EXPECT_THROW(read_quotes(columns), ParseError);
}

TEST(SurfaceIo, RoundTripKeepsSidecar) {
    const auto s = LocalVolSurface::from_quotes(step_lattice(), 0.1, 1.0 / 730.0, true);
    std::stringstream ss;
    ss << "# provenance line\n";
    write_local_vol(ss, s);
    const auto back = read_local_vol(ss);
    EXPECT_EQ(back.nodal_values(), s.nodal_values());
    EXPECT_EQ(back.strikes(), s.strikes());
    EXPECT_EQ(back.hurst(), 0.1);
    EXPECT_EQ(back.delta(), 1.0 / 730.0);
    EXPECT_TRUE(back.flat_strike_below_delta());
    std::istringstream missing("maturity,strike,local_vol\n1,1,0.2\n");
    EXPECT_THROW(read_local_vol(missing), ParseError);
}
