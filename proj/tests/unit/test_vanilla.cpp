#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <vector>

#include "roughlv/vanilla.hpp"

using namespace roughlv;

namespace {

PathBatch constant_batch(double spot, std::size_t paths) {
    PathBatch b;
    b.grid = {1.0};
    b.n_paths = paths;
    b.spot.assign(paths, spot);
    b.variance.assign(paths, 0.0);
    return b;
}

}  // namespace

TEST(BlackPrice, AtTheMoneyIdentity) {
    const boost::math::normal n01;
    EXPECT_NEAR(black_price(1.0, 1.0, 0.2), 2.0 * boost::math::cdf(n01, 0.1) - 1.0, 1e-15);
    EXPECT_NEAR(black_price(1.0, 1.0, 0.2), 0.0797, 1e-4);
}

TEST(BlackPrice, MatchesTextbookFormula) {
    const boost::math::normal n01;
    for (double k : {0.5, 0.9, 1.0, 1.3})
        for (double s : {0.1, 0.4}) {
            const double t = 0.7;
            const double d1 = (-std::log(k) + 0.5 * s * s * t) / (s * std::sqrt(t));
            const double d2 = d1 - s * std::sqrt(t);
            const double call = boost::math::cdf(n01, d1) - k * boost::math::cdf(n01, d2);
            EXPECT_NEAR(black_price(t, k, s, OptionKind::call), call, 1e-14);
            EXPECT_NEAR(black_price(t, k, s, OptionKind::put), call - 1.0 + k, 1e-14);
        }
}

TEST(BlackPrice, LimitsAndIntrinsic) {
    EXPECT_NEAR(black_price(1.0, 1e-12, 0.2), 1.0, 1e-11);
    for (double k : {0.5, 1.0, 1.5}) {
        EXPECT_EQ(black_price(1.0, k, 0.0), std::max(1.0 - k, 0.0));
        EXPECT_EQ(black_price(1.0, k, 0.0, OptionKind::put), std::max(k - 1.0, 0.0));
    }
    EXPECT_THROW(black_price(0.0, 1.0, 0.2), DomainError);
    EXPECT_THROW(black_price(1.0, -1.0, 0.2), DomainError);
}

TEST(BlackPrice, PutCallParityAndMonotonicity) {
    for (double k : {0.3, 0.8, 1.0, 2.0})
        for (double s = 0.05; s < 1.5; s += 0.05) {
            const double c = black_price(0.5, k, s);
            const double p = black_price(0.5, k, s, OptionKind::put);
            EXPECT_NEAR(c - p, 1.0 - k, 1e-15);
            // Strict growth wherever the increment exceeds the rounding of the price.
            if (1e-3 * black_vega(0.5, k, s) > 1e-14)
                EXPECT_GT(black_price(0.5, k, s + 1e-3), c);
            else
                EXPECT_GE(black_price(0.5, k, s + 1e-3), c);
        }
}

TEST(ImpliedVol, RoundTripOverDomain) {
    // Points where the out-of-the-money price underflows carry no information
    // about sigma and are skipped; elsewhere both option kinds are inverted,
    // the in-the-money one only where its time value is resolvable.
    double worst = 0.0;
    std::size_t checked = 0;
    for (int it = 0; it <= 20; ++it) {
        const double t = 1e-4 * std::pow(5.0 / 1e-4, it / 20.0);
        for (int ik = 0; ik <= 30; ++ik) {
            const double k = 0.3 * std::pow(10.0, ik / 30.0);
            for (int is = 0; is <= 25; ++is) {
                const double sigma = 0.01 * std::pow(200.0, is / 25.0);
                for (OptionKind kind : {OptionKind::call, OptionKind::put}) {
                    const double price = black_price(t, k, sigma, kind);
                    const double time_value = price - intrinsic(k, kind);
                    const bool otm = intrinsic(k, kind) == 0.0;
                    if (!(time_value > 1e-300)) continue;
                    if (!otm && time_value < 1e-6 * price) continue;
                    const double back = implied_vol(price, t, k, kind);
                    worst = std::max(worst, std::abs(back - sigma));
                    ++checked;
                }
            }
        }
    }
    EXPECT_GT(checked, 10000u);
    EXPECT_LE(worst, 1e-10);
}

TEST(ImpliedVol, ReferenceRoundTrip) {
    EXPECT_NEAR(implied_vol(black_price(1.0, 1.0, 0.2), 1.0, 1.0), 0.2, 1e-12);
}

TEST(ImpliedVol, BandEdgesConverge) {
    const double k = 0.8;
    for (double tiny : {1e-6, 1e-9, 1e-12}) {
        const double v = implied_vol(1.0 - k + tiny, 1.0, k);
        EXPECT_TRUE(std::isfinite(v));
        // The in-the-money price itself only resolves tiny to the rounding of 1 - k.
        EXPECT_NEAR(black_price(1.0, k, v) - (1.0 - k), tiny, 1e-4 * tiny);
    }
    const double hi = implied_vol(1.0 - 1e-9, 1.0, 1.2);
    EXPECT_GT(hi, 5.0);
}

TEST(ImpliedVol, OutsideBandReportsBound) {
    try {
        implied_vol(0.1, 1.0, 0.8);
        FAIL();
    } catch (const InversionError& e) {
        EXPECT_EQ(e.bound(), InversionError::Bound::lower);
    }
    try {
        implied_vol(1.0, 1.0, 0.8);
        FAIL();
    } catch (const InversionError& e) {
        EXPECT_EQ(e.bound(), InversionError::Bound::upper);
    }
    try {
        implied_vol(1.3, 1.0, 1.3, OptionKind::put);
        FAIL();
    } catch (const InversionError& e) {
        EXPECT_EQ(e.bound(), InversionError::Bound::upper);
    }
}

TEST(McPrice, ConstantPaths) {
    const auto b = constant_batch(1.0, 10);
    const auto c = mc_price(b, 1.0, 0.8);
    EXPECT_DOUBLE_EQ(c.price, 0.2);
    EXPECT_EQ(c.stderr_, 0.0);
    EXPECT_THROW(mc_price(b, 0.5, 0.8), LookupError);
}

TEST(McPrice, ParityOnSharedPaths) {
    PathBatch b;
    b.grid = {1.0};
    b.n_paths = 1000;
    for (std::size_t i = 0; i < b.n_paths; ++i) b.spot.push_back(0.5 + 1.0 * static_cast<double>(i) / 999.0);
    b.variance.assign(b.n_paths, 0.0);
    double mean = 0.0;
    for (double s : b.spot) mean += s / 1000.0;
    for (double k : {0.8, 1.0, 1.2}) {
        const auto c = mc_price(b, 1.0, k);
        const auto p = mc_price(b, 1.0, k, OptionKind::put);
        EXPECT_NEAR(c.price - p.price, mean - k, 1e-12);
    }
}

TEST(McPrice, AntitheticPairsAveragedForStderr) {
    PathBatch b;
    b.grid = {1.0};
    b.n_paths = 4;
    b.spot = {0.9, 1.1, 0.8, 1.2};
    b.variance.assign(4, 0.0);
    b.antithetic = true;
    const auto f = mc_price(b, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(f.price, 1.0);
    EXPECT_NEAR(f.stderr_, 0.0, 1e-15);
}
